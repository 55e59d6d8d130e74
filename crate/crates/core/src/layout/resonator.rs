//! Quarter-wave resonator planning: coupler arm, lead and meander.
//!
//! Local frame: the shorted end sits at the origin and the coupler runs
//! along +x, parallel to the feedline, which lies below at negative y.
//! The meander stacks upward (+y) above the coupler.

use std::f64::consts::PI;

use super::geometry::{BBox, Point, Polygon, Segment, Turtle};
use super::LayoutError;
use crate::cpw_analytics::{line_properties, quarter_wave_length, CpwGeometry};

/// Meander envelope limits for planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanderLimits {
    /// Center-to-center spacing of adjacent runs, µm.
    pub pitch: f64,
    /// Length of a full meander run, µm.
    pub width: f64,
    /// Vertical lead between the coupler bend and the first run, µm.
    pub lead: f64,
    /// Shortest allowed final run, µm.
    pub min_run: f64,
    /// Largest allowed envelope height above the coupler, µm.
    pub max_height: f64,
}

impl Default for MeanderLimits {
    fn default() -> Self {
        Self {
            pitch: 120.0,
            width: 1000.0,
            lead: 60.0,
            min_run: 10.0,
            max_height: 3000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorDesign {
    pub label: String,
    /// GHz.
    pub target_f0: f64,
    /// µm.
    pub coupler_length: f64,
    pub cpw: CpwGeometry,
    pub meander_pitch: f64,
    pub meander_width: f64,
    pub fillet_radius: f64,
    /// Ground strip between the feedline gap and the coupler gap, µm.
    pub feedline_offset_gap: f64,
    /// Required centerline length, µm.
    pub target_length: f64,
    pub path: Vec<Segment>,
    /// Index into `path` of each meander run (horizontal straight).
    pub runs: Vec<usize>,
}

impl ResonatorDesign {
    /// Centerline length including arcs, µm.
    pub fn centerline_length(&self) -> f64 {
        self.path.iter().map(Segment::length).sum()
    }

    pub fn half_width(&self) -> f64 {
        self.cpw.trace_width_s / 2.0 + self.cpw.gap_width_g
    }

    /// Local bounding box of all etched geometry.
    pub fn local_bbox(&self) -> BBox {
        let hw = self.half_width();
        let mut b = BBox::empty();
        for seg in &self.path {
            for off in [-hw, hw] {
                for p in seg.offset_polyline(off) {
                    b.include(p);
                }
            }
        }
        // open-end cap protrudes by one gap width; shorted caps by the fillet
        b.expand(self.cpw.gap_width_g.max(self.fillet_radius))
    }

    /// Etch polygons in the local frame, in path order followed by end caps.
    pub fn polygons(&self) -> Vec<Polygon> {
        let s2 = self.cpw.trace_width_s / 2.0;
        let g = self.cpw.gap_width_g;
        let mut out = Vec::with_capacity(2 * self.path.len() + 3);
        if let Some(first) = self.path.first() {
            out.extend(shorted_end_caps(first, s2, g, self.fillet_radius));
        }
        for seg in &self.path {
            out.push(seg.strip(s2, s2 + g));
            out.push(seg.strip(-s2 - g, -s2));
        }
        if let Some(last) = self.path.last() {
            out.push(open_end_cap(last, s2, g, self.fillet_radius));
        }
        out
    }
}

/// Plans the centerline of one resonator.
#[allow(clippy::too_many_arguments)]
pub fn plan_resonator(
    label: &str,
    target_f0: f64,
    coupler_length: f64,
    cpw: &CpwGeometry,
    limits: &MeanderLimits,
    fillet_radius: f64,
    feedline_offset_gap: f64,
) -> Result<ResonatorDesign, LayoutError> {
    let infeasible = |reason: String| LayoutError::Infeasible {
        label: label.to_string(),
        reason,
    };
    if !(fillet_radius > 0.0) || fillet_radius > cpw.gap_width_g / 2.0 + 1e-12 {
        return Err(LayoutError::InvalidDesign(format!(
            "{label}: fillet radius {fillet_radius} µm must be in (0, g/2]"
        )));
    }
    let radius = limits.pitch / 2.0;
    let hw = cpw.trace_width_s / 2.0 + cpw.gap_width_g;
    if radius <= hw {
        return Err(infeasible(format!(
            "meander pitch {} µm too tight for the CPW",
            limits.pitch
        )));
    }
    if !(coupler_length > 0.0) {
        return Err(infeasible(format!(
            "coupler length {coupler_length} µm must be positive"
        )));
    }
    let props = line_properties(cpw).map_err(|e| infeasible(e.to_string()))?;
    let target =
        quarter_wave_length(target_f0, &props).map_err(|e| infeasible(e.to_string()))? * 1e3;

    let quarter = radius * PI / 2.0;
    let half = radius * PI;
    let fixed = coupler_length + 2.0 * quarter + limits.lead;
    let rest = target - fixed;
    if rest < limits.min_run {
        return Err(infeasible(format!(
            "required length {target:.1} µm is shorter than coupler plus bend allowance {:.1} µm",
            fixed + limits.min_run
        )));
    }
    let unit = limits.width + half;
    let full = ((rest - limits.min_run) / unit).floor().max(0.0) as usize;
    let mut last = rest - full as f64 * unit;
    let mut lead = limits.lead;
    if last > limits.width {
        lead += last - limits.width;
        last = limits.width;
    }

    let mut t = Turtle::new(Point::new(0.0, 0.0), 0.0);
    t.forward(coupler_length)
        .turn(PI / 2.0, radius)
        .forward(lead)
        .turn(PI / 2.0, radius);
    let mut runs = Vec::with_capacity(full + 1);
    for i in 0..full {
        runs.push(t.segments.len());
        t.forward(limits.width);
        // alternate right and left U-turns
        let dir = if i % 2 == 0 { -1.0 } else { 1.0 };
        t.turn(dir * PI, radius);
    }
    runs.push(t.segments.len());
    t.forward(last);

    let height = t.segments.iter().map(|s| s.end().y).fold(0.0, f64::max) + hw;
    if height > limits.max_height {
        return Err(infeasible(format!(
            "meander height {height:.0} µm exceeds the envelope limit {:.0} µm",
            limits.max_height
        )));
    }

    let design = ResonatorDesign {
        label: label.to_string(),
        target_f0,
        coupler_length,
        cpw: *cpw,
        meander_pitch: limits.pitch,
        meander_width: limits.width,
        fillet_radius,
        feedline_offset_gap,
        target_length: target,
        path: t.segments,
        runs,
    };
    debug_assert!((design.centerline_length() / target - 1.0).abs() < 1e-9);
    Ok(design)
}

/// Rounded terminations of both gap strips behind the shorted start.
fn shorted_end_caps(first: &Segment, s2: f64, g: f64, rf: f64) -> Vec<Polygon> {
    let origin = first.start();
    let h = first.heading_at(0.0);
    let frame = LocalFrame::new(origin, h);
    [(s2, s2 + g), (-s2 - g, -s2)]
        .into_iter()
        .map(|(lo, hi)| {
            let mut pts = vec![frame.at(0.0, hi)];
            // upper corner: center (0, hi - rf), from angle pi/2 to pi
            pts.extend(frame.arc(0.0, hi - rf, rf, PI / 2.0, PI / 2.0));
            pts.extend(frame.arc(0.0, lo + rf, rf, PI, PI / 2.0));
            pts.push(frame.at(0.0, lo));
            Polygon::new(pts)
        })
        .collect()
}

/// U-shaped gap around the open end with filleted corners.
fn open_end_cap(last: &Segment, s2: f64, g: f64, rf: f64) -> Polygon {
    let frame = LocalFrame::new(last.end(), last.heading_at(1.0));
    let outer = s2 + g;
    let mut pts = vec![frame.at(0.0, -outer), frame.at(g - rf, -outer)];
    pts.extend(frame.arc(g - rf, -outer + rf, rf, -PI / 2.0, PI / 2.0));
    pts.extend(frame.arc(g - rf, outer - rf, rf, 0.0, PI / 2.0));
    pts.push(frame.at(0.0, outer));
    pts.push(frame.at(0.0, s2));
    // rounded metal corners of the trace end
    pts.extend(frame.arc(-rf, s2 - rf, rf, PI / 2.0, -PI / 2.0));
    pts.extend(frame.arc(-rf, -s2 + rf, rf, 0.0, -PI / 2.0));
    pts.push(frame.at(0.0, -s2));
    Polygon::new(pts)
}

struct LocalFrame {
    origin: Point,
    c: f64,
    s: f64,
}

impl LocalFrame {
    fn new(origin: Point, heading: f64) -> Self {
        let (s, c) = heading.sin_cos();
        Self { origin, c, s }
    }

    fn at(&self, u: f64, v: f64) -> Point {
        Point::new(
            self.origin.x + u * self.c - v * self.s,
            self.origin.y + u * self.s + v * self.c,
        )
    }

    fn arc(&self, cu: f64, cv: f64, r: f64, start: f64, sweep: f64) -> Vec<Point> {
        super::geometry::arc_points(Point::new(cu, cv), r, start, sweep)
            .into_iter()
            .map(|p| self.at(p.x, p.y))
            .collect()
    }
}
