//! Ground-plane connectivity on a run-length raster of the metal layer.
//!
//! Pixel centers sit on a 1 µm grid. Metal narrower than a pixel could be
//! missed, but every metal feature is at least the design rule wide, so
//! 4-connected runs reproduce the true topology.

use super::chip::RenderedChip;
use super::geometry::Point;

const PIXEL_UM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    start: u32,
    /// Exclusive.
    end: u32,
    component: u32,
}

/// Metal regions of a rendered chip, labelled by connected component.
#[derive(Debug, Clone)]
pub struct MetalRaster {
    width_px: u32,
    height_px: u32,
    rows: Vec<Vec<Run>>,
    components: u32,
}

struct ActiveEdge {
    a: Point,
    b: Point,
    poly: usize,
}

fn etch_intervals(edges: &[ActiveEdge], y: f64) -> Vec<(f64, f64)> {
    // crossings grouped per polygon, even-odd within each
    let mut hits: Vec<(usize, f64)> = edges
        .iter()
        .filter(|e| (e.a.y > y) != (e.b.y > y))
        .map(|e| {
            (
                e.poly,
                e.a.x + (y - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y),
            )
        })
        .collect();
    hits.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut iv: Vec<(f64, f64)> = hits.chunks_exact(2).map(|c| (c[0].1, c[1].1)).collect();
    iv.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1e-9 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn add(&mut self) -> u32 {
        self.0.push(self.0.len() as u32);
        self.0.len() as u32 - 1
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.0[i as usize] != i {
            let p = self.0[self.0[i as usize] as usize];
            self.0[i as usize] = p;
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b) as usize] = a.min(b);
        }
    }
}

impl MetalRaster {
    pub fn build(rendered: &RenderedChip) -> Self {
        let width_px = (rendered.bounds.width() / PIXEL_UM).round().max(0.0) as u32;
        let height_px = (rendered.bounds.height() / PIXEL_UM).round().max(0.0) as u32;
        let origin = rendered.bounds.min;

        let mut table: Vec<ActiveEdge> = rendered
            .polygons
            .iter()
            .enumerate()
            .flat_map(|(poly, p)| p.edges().map(move |(a, b)| ActiveEdge { a, b, poly }))
            .filter(|e| e.a.y != e.b.y)
            .collect();
        table.sort_by(|p, q| p.a.y.min(p.b.y).total_cmp(&q.a.y.min(q.b.y)));

        let mut dsu = Dsu(Vec::new());
        let mut rows: Vec<Vec<Run>> = Vec::with_capacity(height_px as usize);
        let mut active: Vec<ActiveEdge> = Vec::new();
        let mut next = 0;
        for j in 0..height_px {
            let y = origin.y + (j as f64 + 0.5) * PIXEL_UM;
            while next < table.len() && table[next].a.y.min(table[next].b.y) <= y {
                let e = &table[next];
                active.push(ActiveEdge {
                    a: e.a,
                    b: e.b,
                    poly: e.poly,
                });
                next += 1;
            }
            active.retain(|e| e.a.y.max(e.b.y) >= y);
            let etch = etch_intervals(&active, y);
            // pixels whose centers fall outside every etch interval
            let mut runs = Vec::new();
            let mut cursor = 0u32;
            for (a, b) in etch {
                let first = (((a - origin.x) / PIXEL_UM) - 0.5).ceil().max(0.0) as u32;
                let last = (((b - origin.x) / PIXEL_UM) - 0.5).floor();
                if last < 0.0 {
                    continue;
                }
                let last = (last as u32).min(width_px.saturating_sub(1));
                if first > last {
                    continue;
                }
                if first > cursor {
                    runs.push(Run {
                        start: cursor,
                        end: first,
                        component: dsu.add(),
                    });
                }
                cursor = cursor.max(last + 1);
            }
            if cursor < width_px {
                runs.push(Run {
                    start: cursor,
                    end: width_px,
                    component: dsu.add(),
                });
            }
            if let Some(prev) = rows.last() {
                let mut k = 0;
                for r in &runs {
                    while k < prev.len() && prev[k].end <= r.start {
                        k += 1;
                    }
                    let mut m = k;
                    while m < prev.len() && prev[m].start < r.end {
                        dsu.union(prev[m].component, r.component);
                        m += 1;
                    }
                }
            }
            rows.push(runs);
        }

        // compact labels in raster order
        let mut map = vec![u32::MAX; dsu.0.len()];
        let mut components = 0;
        for row in rows.iter_mut() {
            for r in row.iter_mut() {
                let root = dsu.find(r.component) as usize;
                if map[root] == u32::MAX {
                    map[root] = components;
                    components += 1;
                }
                r.component = map[root];
            }
        }
        Self {
            width_px,
            height_px,
            rows,
            components,
        }
    }

    pub fn component_count(&self) -> u32 {
        self.components
    }

    /// Metal component under `p`, or `None` on etch or off-chip.
    pub fn component_at(&self, p: Point) -> Option<u32> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let (i, j) = ((p.x / PIXEL_UM) as u32, (p.y / PIXEL_UM) as u32);
        if i >= self.width_px || j >= self.height_px {
            return None;
        }
        let row = &self.rows[j as usize];
        let k = row.partition_point(|r| r.end <= i);
        row.get(k).filter(|r| r.start <= i).map(|r| r.component)
    }

    /// Metal area in µm², counted by pixel.
    pub fn metal_area(&self) -> f64 {
        let px: u64 = self
            .rows
            .iter()
            .flatten()
            .map(|r| (r.end - r.start) as u64)
            .sum();
        px as f64 * PIXEL_UM * PIXEL_UM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    /// Metal components other than the signal conductor.
    pub ground_components: usize,
    /// Ground components not joined to the rest after bonding.
    pub isolated: Vec<u32>,
    pub bonds_off_ground: usize,
}

impl ConnectivityReport {
    pub fn connected(&self) -> bool {
        self.isolated.is_empty() && self.ground_components > 0
    }
}

/// Joins ground components with bonds; endpoints off-chip join the package.
pub fn ground_connectivity(
    raster: &MetalRaster,
    signal: Option<u32>,
    bonds: &[(Point, Point)],
) -> ConnectivityReport {
    let n = raster.component_count();
    let package = n;
    let mut dsu = Dsu((0..=n).collect());
    let mut off = 0;
    let node = |p: Point| -> Option<u32> {
        let outside = p.x < 0.0
            || p.y < 0.0
            || p.x >= raster.width_px as f64 * PIXEL_UM
            || p.y >= raster.height_px as f64 * PIXEL_UM;
        if outside {
            return Some(package);
        }
        raster.component_at(p).filter(|&c| Some(c) != signal)
    };
    for &(a, b) in bonds {
        match (node(a), node(b)) {
            (Some(x), Some(y)) => dsu.union(x, y),
            _ => off += 1,
        }
    }
    let ground: Vec<u32> = (0..n).filter(|&c| Some(c) != signal).collect();
    let mut isolated = Vec::new();
    if let Some(&first) = ground.first() {
        let root = dsu.find(first);
        for &c in &ground[1..] {
            if dsu.find(c) != root {
                isolated.push(c);
            }
        }
    }
    ConnectivityReport {
        ground_components: ground.len(),
        isolated,
        bonds_off_ground: off,
    }
}
