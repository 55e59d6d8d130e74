//! Wirebond plan: feedline straddles, bonds across resonator meanders and
//! perimeter stitches to the package ground.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::chip::{ChipDesign, RenderedChip};
use super::connectivity::{ground_connectivity, ConnectivityReport, MetalRaster};
use super::geometry::{point_segment_distance, Point, Segment};
use super::LayoutError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WirebondRules {
    pub feedline_interval_um: f64,
    pub feedline_span_um: f64,
    pub min_span_um: f64,
    pub max_span_um: f64,
    /// Required clearance from any etch around a bond foot, µm.
    pub landing_radius_um: f64,
    /// Step used when nudging a blocked bond along the line, µm.
    pub shift_step_um: f64,
    pub perimeter_interval_um: f64,
    pub perimeter_inset_um: f64,
    pub perimeter_reach_um: f64,
}

impl Default for WirebondRules {
    fn default() -> Self {
        Self {
            feedline_interval_um: 400.0,
            feedline_span_um: 150.0,
            min_span_um: 75.0,
            max_span_um: 600.0,
            landing_radius_um: 20.0,
            shift_step_um: 25.0,
            perimeter_interval_um: 750.0,
            perimeter_inset_um: 50.0,
            perimeter_reach_um: 250.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BondPurpose {
    FeedlineStraddle,
    ResonatorStraddle,
    GroundStitch,
}

impl fmt::Display for BondPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BondPurpose::FeedlineStraddle => "feedline-straddle",
            BondPurpose::ResonatorStraddle => "resonator-straddle",
            BondPurpose::GroundStitch => "ground-stitch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub start: Point,
    pub end: Point,
    pub purpose: BondPurpose,
}

impl Bond {
    pub fn span(&self) -> f64 {
        self.start.dist(self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WirebondMap {
    pub bonds: Vec<Bond>,
    pub warnings: Vec<String>,
}

impl WirebondMap {
    pub fn count(&self, purpose: BondPurpose) -> usize {
        self.bonds.iter().filter(|b| b.purpose == purpose).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LayoutError> {
        #[derive(Serialize)]
        struct Row {
            x1_um: f64,
            y1_um: f64,
            x2_um: f64,
            y2_um: f64,
            purpose: BondPurpose,
        }
        let mut w = csv::Writer::from_writer(out);
        let round = |v: f64| (v * 1e3).round() / 1e3;
        for b in &self.bonds {
            w.serialize(Row {
                x1_um: round(b.start.x),
                y1_um: round(b.start.y),
                x2_um: round(b.end.x),
                y2_um: round(b.end.y),
                purpose: b.purpose,
            })
            .map_err(|e| LayoutError::InvalidDesign(e.to_string()))?;
        }
        if self.bonds.is_empty() {
            w.write_record(["x1_um", "y1_um", "x2_um", "y2_um", "purpose"])
                .map_err(|e| LayoutError::InvalidDesign(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Positions strictly inside `(start, start + length)` at multiples of `interval`.
pub fn straddle_positions(start: f64, length: f64, interval: f64) -> Vec<f64> {
    if !(interval > 0.0) || !(length > 0.0) {
        return Vec::new();
    }
    let n = (length / interval).ceil() as usize;
    (1..n).map(|k| start + k as f64 * interval).collect()
}

/// Etch edges bucketed for clearance queries.
struct EtchIndex {
    cell: f64,
    grid: HashMap<(i64, i64), Vec<(Point, Point)>>,
}

impl EtchIndex {
    fn new(rendered: &RenderedChip, cell: f64) -> Self {
        let mut grid: HashMap<(i64, i64), Vec<(Point, Point)>> = HashMap::new();
        for p in &rendered.polygons {
            for (a, b) in p.edges() {
                let (x0, x1) = (
                    (a.x.min(b.x) / cell).floor() as i64,
                    (a.x.max(b.x) / cell).floor() as i64,
                );
                let (y0, y1) = (
                    (a.y.min(b.y) / cell).floor() as i64,
                    (a.y.max(b.y) / cell).floor() as i64,
                );
                for cx in x0..=x1 {
                    for cy in y0..=y1 {
                        grid.entry((cx, cy)).or_default().push((a, b));
                    }
                }
            }
        }
        Self { cell, grid }
    }

    fn clearance_at_least(&self, p: Point, r: f64) -> bool {
        let c = |v: f64| (v / self.cell).floor() as i64;
        for cx in c(p.x - r)..=c(p.x + r) {
            for cy in c(p.y - r)..=c(p.y + r) {
                if let Some(edges) = self.grid.get(&(cx, cy)) {
                    if edges
                        .iter()
                        .any(|&(a, b)| point_segment_distance(p, a, b) < r)
                    {
                        return false;
                    }
                }
            }
        }
        true
    }
}

struct Planner<'a> {
    rules: &'a WirebondRules,
    raster: &'a MetalRaster,
    signal: Option<u32>,
    etch: EtchIndex,
    width: f64,
    height: f64,
}

impl Planner<'_> {
    fn on_chip(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    fn lands(&self, p: Point) -> bool {
        if !self.on_chip(p) {
            return true;
        }
        match self.raster.component_at(p) {
            Some(c) if Some(c) != self.signal => self
                .etch
                .clearance_at_least(p, self.rules.landing_radius_um),
            _ => false,
        }
    }

    /// Tries the nominal bond, then shifted copies along `along`.
    fn place(
        &self,
        start: Point,
        end: Point,
        along: Point,
        max_shift: f64,
    ) -> Option<(Point, Point)> {
        let step = self.rules.shift_step_um.max(1e-3);
        let mut shifts = vec![0.0];
        let mut s = step;
        while s <= max_shift + 1e-9 {
            shifts.push(s);
            shifts.push(-s);
            s += step;
        }
        shifts
            .into_iter()
            .map(|d| (start + along * d, end + along * d))
            .find(|&(a, b)| self.lands(a) && self.lands(b))
    }
}

/// Run midpoint and run direction of each meander run, in chip coordinates.
fn run_midpoints(design: &ChipDesign, index: usize) -> Vec<(Point, Point)> {
    let r = &design.resonators[index];
    r.design
        .runs
        .iter()
        .filter_map(|&k| match r.design.path[k] {
            Segment::Line { .. } => {
                let seg = r.design.path[k];
                let a = r.transform.apply(seg.start());
                let b = r.transform.apply(seg.end());
                Some(((a + b) * 0.5, (b - a) * (1.0 / a.dist(b))))
            }
            Segment::Arc { .. } => None,
        })
        .collect()
}

/// Plans every bond for a rendered chip.
pub fn plan_wirebonds(
    design: &ChipDesign,
    rendered: &RenderedChip,
    raster: &MetalRaster,
    rules: &WirebondRules,
) -> WirebondMap {
    let f = &design.feedline;
    let signal = raster.component_at(Point::new(design.width / 2.0, f.y));
    let planner = Planner {
        rules,
        raster,
        signal,
        etch: EtchIndex::new(rendered, 25.0),
        width: design.width,
        height: design.height,
    };
    let mut map = WirebondMap::default();
    let push = |map: &mut WirebondMap, a: Point, b: Point, purpose: BondPurpose| {
        let span = a.dist(b);
        if span < rules.min_span_um || span > rules.max_span_um {
            map.warnings.push(format!(
                "{purpose} bond at ({:.1}, {:.1}) has span {span:.1} µm outside limits",
                a.x, a.y
            ));
        } else {
            map.bonds.push(Bond {
                start: a,
                end: b,
                purpose,
            });
        }
    };

    let (x0, x1) = f.straight_span(design.width);
    let half = rules.feedline_span_um / 2.0;
    for x in straddle_positions(x0, x1 - x0, rules.feedline_interval_um) {
        let a = Point::new(x, f.y - half);
        let b = Point::new(x, f.y + half);
        match planner.place(a, b, Point::new(1.0, 0.0), rules.feedline_interval_um / 2.0) {
            Some((a, b)) => push(&mut map, a, b, BondPurpose::FeedlineStraddle),
            None => map.warnings.push(format!(
                "feedline straddle at x = {x:.1} µm skipped: no clear landing"
            )),
        }
    }

    for (i, r) in design.resonators.iter().enumerate() {
        let label = &r.design.label;
        let room = r.design.meander_pitch / 2.0 - r.design.half_width();
        if room < rules.landing_radius_um {
            map.warnings.push(format!(
                "resonator {label}: meander pitch {} µm leaves {room:.1} µm for a {:.1} µm bond landing, skipped",
                r.design.meander_pitch, rules.landing_radius_um
            ));
            continue;
        }
        let pitch = r.design.meander_pitch;
        for (mid, dir) in run_midpoints(design, i) {
            let normal = Point::new(-dir.y, dir.x);
            let a = mid - normal * (pitch / 2.0);
            let b = mid + normal * (pitch / 2.0);
            match planner.place(a, b, dir, r.design.meander_width / 4.0) {
                Some((a, b)) => push(&mut map, a, b, BondPurpose::ResonatorStraddle),
                None => map.warnings.push(format!(
                    "resonator {label}: run at ({:.1}, {:.1}) has no clear landing, skipped",
                    mid.x, mid.y
                )),
            }
        }
    }

    let (w, h) = (design.width, design.height);
    let (inset, reach) = (rules.perimeter_inset_um, rules.perimeter_reach_um);
    let interval = rules.perimeter_interval_um;
    let mut stitches = Vec::new();
    for x in straddle_positions(0.0, w, interval) {
        stitches.push((
            Point::new(x, inset),
            Point::new(x, -reach),
            Point::new(1.0, 0.0),
        ));
        stitches.push((
            Point::new(x, h - inset),
            Point::new(x, h + reach),
            Point::new(1.0, 0.0),
        ));
    }
    for y in straddle_positions(0.0, h, interval) {
        stitches.push((
            Point::new(inset, y),
            Point::new(-reach, y),
            Point::new(0.0, 1.0),
        ));
        stitches.push((
            Point::new(w - inset, y),
            Point::new(w + reach, y),
            Point::new(0.0, 1.0),
        ));
    }
    for (a, b, along) in stitches {
        match planner.place(a, b, along, interval / 2.0) {
            Some((a, b)) => push(&mut map, a, b, BondPurpose::GroundStitch),
            None => map.warnings.push(format!(
                "ground stitch at ({:.1}, {:.1}) skipped: no clear landing",
                a.x, a.y
            )),
        }
    }
    map
}

/// Ground connectivity of a chip once `map` is bonded.
pub fn check_ground(
    design: &ChipDesign,
    raster: &MetalRaster,
    map: &WirebondMap,
) -> ConnectivityReport {
    let signal = raster.component_at(Point::new(design.width / 2.0, design.feedline.y));
    let bonds: Vec<(Point, Point)> = map.bonds.iter().map(|b| (b.start, b.end)).collect();
    ground_connectivity(raster, signal, &bonds)
}
