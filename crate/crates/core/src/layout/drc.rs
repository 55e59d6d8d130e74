//! Minimum width and spacing scan over etch polygons.
//!
//! Pieces that abut along shared edges (strips of consecutive path
//! segments, caps) are merged first: collinear antiparallel edge overlaps
//! are interior and dropped. What remains is the boundary of the etch
//! union. Facing boundary edges then measure either etch width or metal
//! spacing depending on which side the partner lies. Separate etch
//! regions must additionally keep the rule distance everywhere.

use std::collections::HashMap;

use super::geometry::{segment_distance, Point, Polygon};

/// Slack for database-grid snapping and arc chords, µm.
pub const DRC_TOLERANCE_UM: f64 = 5e-3;
const TOUCH_UM: f64 = 1e-6;
const ANTIPARALLEL: f64 = -0.999;
const CELL_UM: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Etch narrower than the rule.
    Width,
    /// Metal between etch regions narrower than the rule.
    Spacing,
    SelfIntersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: Point,
    /// Measured width or spacing, µm (0 for self-intersection).
    pub measured: f64,
    pub polygons: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrcReport {
    pub rule_um: f64,
    pub violations: Vec<Violation>,
    pub edges_checked: usize,
    pub etch_regions: usize,
}

impl DrcReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Smallest measured width or spacing among violations.
    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .min_by(|a, b| a.measured.total_cmp(&b.measured))
    }
}

struct Edge {
    a: Point,
    b: Point,
    dir: Point,
    len: f64,
    normal: Point,
    poly: usize,
    cells: (i64, i64, i64, i64),
}

impl Edge {
    fn at(&self, t: f64) -> Point {
        self.a + self.dir * t
    }

    /// Parameter of the projection of `p` onto this edge's line, µm.
    fn project(&self, p: Point) -> f64 {
        (p.x - self.a.x) * self.dir.x + (p.y - self.a.y) * self.dir.y
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a.x * b.x + a.y * b.y
}

fn cell(v: f64) -> i64 {
    (v / CELL_UM).floor() as i64
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn subtract(intervals: &mut Vec<(f64, f64)>, lo: f64, hi: f64) {
    let mut out = Vec::with_capacity(intervals.len() + 1);
    for &(a, b) in intervals.iter() {
        if hi <= a || lo >= b {
            out.push((a, b));
            continue;
        }
        if lo > a + TOUCH_UM {
            out.push((a, lo));
        }
        if hi < b - TOUCH_UM {
            out.push((hi, b));
        }
    }
    *intervals = out;
}

/// Checks every polygon pair for width and spacing below `rule_um`.
pub fn check(polygons: &[Polygon], rule_um: f64) -> DrcReport {
    let reach = rule_um + DRC_TOLERANCE_UM;
    let limit = rule_um - DRC_TOLERANCE_UM;
    let mut violations = Vec::new();
    let mut edges = Vec::new();
    for (pi, poly) in polygons.iter().enumerate() {
        if poly.self_intersects() {
            violations.push(Violation {
                kind: ViolationKind::SelfIntersection,
                location: poly.points[0],
                measured: 0.0,
                polygons: (pi, pi),
            });
        }
        // CCW polygons: outward normal is to the right of travel
        let sign = if poly.signed_area() >= 0.0 { 1.0 } else { -1.0 };
        for (a, b) in poly.edges() {
            let len = a.dist(b);
            if len < 1e-12 {
                continue;
            }
            let dir = (b - a) * (1.0 / len);
            edges.push(Edge {
                a,
                b,
                dir,
                len,
                normal: Point::new(dir.y, -dir.x) * sign,
                poly: pi,
                cells: (
                    cell(a.x.min(b.x) - reach),
                    cell(a.y.min(b.y) - reach),
                    cell(a.x.max(b.x) + reach),
                    cell(a.y.max(b.y) + reach),
                ),
            });
        }
    }

    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        for cx in e.cells.0..=e.cells.2 {
            for cy in e.cells.1..=e.cells.3 {
                grid.entry((cx, cy)).or_default().push(i as u32);
            }
        }
    }
    let mut keys: Vec<(i64, i64)> = grid.keys().copied().collect();
    keys.sort_unstable();
    let mut pairs = Vec::new();
    for key in &keys {
        let list = &grid[key];
        for (k, &i) in list.iter().enumerate() {
            let ei = &edges[i as usize];
            for &j in &list[k + 1..] {
                let ej = &edges[j as usize];
                // visit each pair only in the lowest shared cell
                if (ei.cells.0.max(ej.cells.0), ei.cells.1.max(ej.cells.1)) != *key {
                    continue;
                }
                if ei.cells.0 > ej.cells.2
                    || ej.cells.0 > ei.cells.2
                    || ei.cells.1 > ej.cells.3
                    || ej.cells.1 > ei.cells.3
                {
                    continue;
                }
                pairs.push((i as usize, j as usize));
            }
        }
    }

    // pass 1: merge touching pieces and drop shared interior edges
    let mut dsu = Dsu((0..polygons.len()).collect());
    let mut remaining: Vec<Vec<(f64, f64)>> = edges.iter().map(|e| vec![(0.0, e.len)]).collect();
    for &(i, j) in &pairs {
        let (ei, ej) = (&edges[i], &edges[j]);
        if segment_distance(ei.a, ei.b, ej.a, ej.b) > TOUCH_UM {
            continue;
        }
        if ei.poly != ej.poly {
            dsu.union(ei.poly, ej.poly);
        }
        let collinear = dot(ej.a - ei.a, ei.normal).abs() < TOUCH_UM
            && dot(ej.b - ei.a, ei.normal).abs() < TOUCH_UM;
        if collinear && dot(ei.normal, ej.normal) < ANTIPARALLEL {
            let (p, q) = (ei.project(ej.a), ei.project(ej.b));
            subtract(&mut remaining[i], p.min(q), p.max(q));
            let (p, q) = (ej.project(ei.a), ej.project(ei.b));
            subtract(&mut remaining[j], p.min(q), p.max(q));
        }
    }

    // pass 2: measure boundary pairs
    for &(i, j) in &pairs {
        let (ei, ej) = (&edges[i], &edges[j]);
        let facing = dot(ei.normal, ej.normal) < ANTIPARALLEL;
        let separate = dsu.find(ei.poly) != dsu.find(ej.poly);
        if !facing && !separate {
            continue;
        }
        for &(a0, a1) in &remaining[i] {
            let (pa, pb) = (ei.at(a0), ei.at(a1));
            for &(b0, b1) in &remaining[j] {
                let (qa, qb) = (ej.at(b0), ej.at(b1));
                let d = segment_distance(pa, pb, qa, qb);
                if d >= limit || d <= TOUCH_UM && !separate {
                    continue;
                }
                let mid = (qa + qb) * 0.5;
                if facing {
                    let (s0, s1) = (ei.project(qa), ei.project(qb));
                    let overlap = s0.max(s1).min(a1) - s0.min(s1).max(a0);
                    if overlap <= TOUCH_UM && !separate {
                        continue;
                    }
                }
                let inward = dot(mid - pa, ei.normal) < 0.0;
                let kind = if facing && inward && !separate {
                    ViolationKind::Width
                } else {
                    ViolationKind::Spacing
                };
                violations.push(Violation {
                    kind,
                    location: (pa + pb) * 0.5,
                    measured: d,
                    polygons: (ei.poly, ej.poly),
                });
            }
        }
    }

    let mut roots: Vec<usize> = (0..polygons.len()).map(|i| dsu.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    DrcReport {
        rule_um,
        violations,
        edges_checked: edges.len(),
        etch_regions: roots.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::geometry::Segment;

    #[test]
    fn abutting_strips_merge_cleanly() {
        // two collinear pieces of one 3 µm gap
        let polys = vec![
            Polygon::rect(0.0, 0.0, 10.0, 3.0),
            Polygon::rect(10.0, 0.0, 25.0, 3.0),
        ];
        let r = check(&polys, 3.0);
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.etch_regions, 1);
    }

    #[test]
    fn narrow_gap_flagged_as_width() {
        let r = check(&[Polygon::rect(0.0, 0.0, 20.0, 2.9)], 3.0);
        assert!(!r.passed());
        assert!(r.violations.iter().all(|v| v.kind == ViolationKind::Width));
        assert!((r.worst().unwrap().measured - 2.9).abs() < 1e-9);
    }

    #[test]
    fn narrow_metal_flagged_as_spacing() {
        let polys = vec![
            Polygon::rect(0.0, 0.0, 20.0, 3.0),
            Polygon::rect(0.0, 5.5, 20.0, 8.5),
        ];
        let r = check(&polys, 3.0);
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Spacing && (v.measured - 2.5).abs() < 1e-9));
        let ok = vec![
            Polygon::rect(0.0, 0.0, 20.0, 3.0),
            Polygon::rect(0.0, 6.0, 20.0, 9.0),
        ];
        assert!(check(&ok, 3.0).passed());
    }

    #[test]
    fn corner_to_corner_spacing() {
        let polys = vec![
            Polygon::rect(0.0, 0.0, 5.0, 5.0),
            Polygon::rect(6.0, 6.0, 11.0, 11.0),
        ];
        let r = check(&polys, 3.0);
        assert!(!r.passed());
        assert!((r.worst().unwrap().measured - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn curved_strip_passes() {
        let arc = Segment::Arc {
            center: Point::new(0.0, 0.0),
            radius: 60.0,
            start_angle: 0.0,
            sweep: std::f64::consts::PI,
        };
        let polys = vec![arc.strip(3.0, 6.0), arc.strip(-6.0, -3.0)];
        let r = check(&polys, 3.0);
        assert!(r.passed(), "{:?}", r.worst());
        assert_eq!(r.etch_regions, 2);
    }

    #[test]
    fn default_chip_is_clean() {
        use crate::layout::{build_chip, render_chip, ChipConfig};
        let d = build_chip(&ChipConfig::default()).unwrap();
        let r = check(&render_chip(&d).unwrap().polygons, 3.0);
        assert!(
            r.passed(),
            "{} violations, worst {:?}",
            r.violations.len(),
            r.worst()
        );
    }
}
