//! Graded rectilinear meshes over rectangle-painted cross-sections.

use super::ParticipationError;

/// What fills a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Medium {
    /// Perfect conductor held at `potentials[index]`.
    Conductor(usize),
    Dielectric {
        eps_r: f64,
        bulk: Bulk,
    },
}

/// Bulk bookkeeping class of a dielectric cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bulk {
    Substrate,
    Vacuum,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Held at 0 V.
    Grounded,
    /// Zero normal field.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }
}

/// A 2-D electrostatic problem: media painted as rectangles (later entries
/// win) over a background, inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub bounds: Rect,
    pub background: Medium,
    pub rects: Vec<(Rect, Medium)>,
    pub potentials: Vec<f64>,
    /// Left, right, bottom, top.
    pub sides: [Boundary; 4],
    /// Cell size at rectangle edges on the coarsest level.
    pub h_min: f64,
    /// Cell size far from every edge.
    pub h_max: f64,
    /// Largest ratio of neighbouring cell sizes.
    pub growth: f64,
    /// Mirror the x grid about this line when set.
    pub mirror_x: Option<f64>,
    /// Additional fine grid lines.
    pub x_keys: Vec<f64>,
    pub y_keys: Vec<f64>,
}

impl Domain {
    pub fn medium_at(&self, x: f64, y: f64) -> Medium {
        self.rects
            .iter()
            .rev()
            .find(|(r, _)| r.contains(x, y))
            .map(|&(_, m)| m)
            .unwrap_or(self.background)
    }
}

/// Places nodes on `[a, b]` with every key as a node, sized by a
/// growth-limited field that equals `h_min` at keys.
pub fn grade_1d(a: f64, b: f64, keys: &[f64], h_min: f64, h_max: f64, growth: f64) -> Vec<f64> {
    let slope = (growth - 1.0).max(1e-3);
    let mut pts: Vec<f64> = keys.iter().copied().filter(|&k| k > a && k < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * (b - a).abs().max(1.0));
    let size = |x: f64| {
        let mut h = h_max;
        for &k in &pts {
            let boundary = k == a || k == b;
            let h0 = if boundary { h_max } else { h_min };
            h = h.min(h0 + slope * (x - k).abs());
        }
        h
    };
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut x = lo;
        loop {
            let mut step = size(x);
            for _ in 0..3 {
                step = step.min(size(x + step));
            }
            if x + step >= hi - 0.5 * step {
                break;
            }
            x += step;
            out.push(x);
        }
        out.push(hi);
    }
    out
}

/// Splits every interval into `2^level` equal parts.
pub fn bisect(nodes: &[f64], level: u32) -> Vec<f64> {
    let k = 1usize << level;
    let mut out = Vec::with_capacity((nodes.len() - 1) * k + 1);
    for w in nodes.windows(2) {
        for m in 0..k {
            out.push(w[0] + (w[1] - w[0]) * m as f64 / k as f64);
        }
    }
    out.push(*nodes.last().unwrap());
    out
}

/// Tensor-product mesh with a medium per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major, `(y.len() - 1) × (x.len() - 1)`.
    pub cells: Vec<Medium>,
    pub level: u32,
}

impl Mesh {
    pub fn nx(&self) -> usize {
        self.x.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y.len() - 1
    }

    pub fn cell_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn node_count(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> Medium {
        self.cells[j * self.nx() + i]
    }
}

/// Coarsest-level node coordinates of a domain.
pub fn base_lines(domain: &Domain) -> (Vec<f64>, Vec<f64>) {
    let b = domain.bounds;
    let mut xk: Vec<f64> = domain.x_keys.clone();
    let mut yk: Vec<f64> = domain.y_keys.clone();
    for (r, _) in &domain.rects {
        xk.extend([r.x0, r.x1]);
        yk.extend([r.y0, r.y1]);
    }
    let x = match domain.mirror_x {
        Some(c) => {
            let right_keys: Vec<f64> = xk
                .iter()
                .map(|&k| if k < c { 2.0 * c - k } else { k })
                .collect();
            let half = grade_1d(
                c,
                b.x1,
                &right_keys,
                domain.h_min,
                domain.h_max,
                domain.growth,
            );
            let mut full: Vec<f64> = half.iter().rev().map(|&v| 2.0 * c - v).collect();
            full.pop();
            full.extend(half);
            full
        }
        None => grade_1d(b.x0, b.x1, &xk, domain.h_min, domain.h_max, domain.growth),
    };
    let y = grade_1d(b.y0, b.y1, &yk, domain.h_min, domain.h_max, domain.growth);
    (x, y)
}

/// Builds the mesh at a refinement level, refusing meshes over `max_cells`.
pub fn build_mesh(
    domain: &Domain,
    level: u32,
    max_cells: usize,
) -> Result<Mesh, ParticipationError> {
    let (bx, by) = base_lines(domain);
    let base = (bx.len() - 1) * (by.len() - 1);
    let cells_at = |l: u32| base.saturating_mul(1usize << (2 * l.min(30)));
    if cells_at(level) > max_cells {
        let mut suggested = 0;
        while suggested < level && cells_at(suggested + 1) <= max_cells {
            suggested += 1;
        }
        return Err(ParticipationError::MeshBudget {
            level,
            cells: cells_at(level),
            budget: max_cells,
            suggested_level: (cells_at(0) <= max_cells).then_some(suggested),
        });
    }
    let x = bisect(&bx, level);
    let y = bisect(&by, level);
    let mut cells = Vec::with_capacity((x.len() - 1) * (y.len() - 1));
    for j in 0..y.len() - 1 {
        let yc = 0.5 * (y[j] + y[j + 1]);
        for i in 0..x.len() - 1 {
            cells.push(domain.medium_at(0.5 * (x[i] + x[i + 1]), yc));
        }
    }
    Ok(Mesh { x, y, cells, level })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_nodes_and_growth_bounded() {
        let keys = [3.0, 6.0, 2.9, 6.1];
        let g = grade_1d(0.0, 180.0, &keys, 0.006, 7.2, 1.5);
        for k in keys {
            assert!(g.contains(&k), "{k}");
        }
        assert_eq!((g[0], *g.last().unwrap()), (0.0, 180.0));
        let h: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(h.iter().all(|&d| d > 0.0));
        assert!(h.iter().cloned().fold(0.0, f64::max) <= 7.2 * 1.5 + 1e-9);
        for w in h.windows(2) {
            let r = w[1] / w[0];
            assert!(r < 3.5 && r > 1.0 / 3.5, "ratio {r}");
        }
        assert!(h.iter().cloned().fold(f64::INFINITY, f64::min) <= 0.006 + 1e-12);
    }

    #[test]
    fn bisect_counts() {
        let b = bisect(&[0.0, 1.0, 3.0], 2);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0]);
    }
}
