//! Whole-chip assembly: feedline with tapered pads, placed resonators and labels.

use serde::{Deserialize, Serialize};

use super::font;
use super::geometry::{BBox, Point, Polygon, Transform};
use super::resonator::{plan_resonator, MeanderLimits, ResonatorDesign};
use super::LayoutError;
use crate::coupling::{Calibration, CouplerModel, REFERENCE_RESONATORS};
use crate::cpw_analytics::{line_properties, CpwGeometry, SAPPHIRE_EPS_R, SILICON_EPS_R};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Polygons are the regions where metal is removed.
    DrawEtch,
    /// Polygons are metal; writers invert the tone.
    DrawMetal,
}

impl Polarity {
    pub fn inverted(self) -> Self {
        match self {
            Polarity::DrawEtch => Polarity::DrawMetal,
            Polarity::DrawMetal => Polarity::DrawEtch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substrate {
    Silicon,
    Sapphire,
}

impl Substrate {
    pub fn eps_r(self) -> f64 {
        match self {
            Substrate::Silicon => SILICON_EPS_R,
            Substrate::Sapphire => SAPPHIRE_EPS_R,
        }
    }
}

/// Every tunable of the chip geometry. Defaults reproduce the reference mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChipConfig {
    pub name: String,
    pub width_um: f64,
    pub height_um: f64,
    pub trace_width_um: f64,
    pub gap_width_um: f64,
    pub substrate: Substrate,
    pub metal_thickness_um: f64,
    pub trench_depth_nm: f64,
    pub min_feature_um: f64,
    pub resonator_f0_ghz: Vec<f64>,
    pub resonator_qc: Vec<f64>,
    pub feedline_impedance_ohm: f64,
    pub calibration_length_um: f64,
    pub calibration_qc: f64,
    pub calibration_f_ghz: f64,
    pub meander_pitch_um: f64,
    pub meander_width_um: f64,
    pub lead_length_um: f64,
    pub fillet_radius_um: f64,
    pub coupler_ground_strip_um: f64,
    pub pad_trace_width_um: f64,
    pub pad_gap_um: f64,
    pub pad_length_um: f64,
    pub taper_length_um: f64,
    pub label_height_um: f64,
    pub polarity: Polarity,
}

impl Default for ChipConfig {
    fn default() -> Self {
        Self {
            name: "SIMPLE_RES_MASK".into(),
            width_um: 7500.0,
            height_um: 7500.0,
            trace_width_um: 6.0,
            gap_width_um: 3.0,
            substrate: Substrate::Silicon,
            metal_thickness_um: 0.1,
            trench_depth_nm: 100.0,
            min_feature_um: 3.0,
            resonator_f0_ghz: REFERENCE_RESONATORS
                .iter()
                .map(|r| r.f0_mhz / 1e3)
                .collect(),
            resonator_qc: REFERENCE_RESONATORS.iter().map(|r| r.qc).collect(),
            feedline_impedance_ohm: 50.0,
            calibration_length_um: 200.0,
            calibration_qc: 495e3,
            calibration_f_ghz: 4.6,
            meander_pitch_um: 120.0,
            meander_width_um: 1000.0,
            lead_length_um: 60.0,
            fillet_radius_um: 1.5,
            coupler_ground_strip_um: 6.0,
            pad_trace_width_um: 250.0,
            pad_gap_um: 125.0,
            pad_length_um: 300.0,
            taper_length_um: 300.0,
            label_height_um: 150.0,
            polarity: Polarity::DrawEtch,
        }
    }
}

impl ChipConfig {
    pub fn cpw(&self) -> CpwGeometry {
        CpwGeometry {
            trace_width_s: self.trace_width_um,
            gap_width_g: self.gap_width_um,
            substrate_eps_r: self.substrate.eps_r(),
            metal_thickness: self.metal_thickness_um,
            trench_depth: self.trench_depth_nm,
        }
    }

    pub fn calibration(&self) -> Calibration {
        Calibration {
            length_um: self.calibration_length_um,
            qc: self.calibration_qc,
            f_ghz: self.calibration_f_ghz,
        }
    }

    /// Coupling model calibrated for this chip's CPW.
    pub fn coupler_model(&self) -> Result<CouplerModel, LayoutError> {
        let props =
            line_properties(&self.cpw()).map_err(|e| LayoutError::InvalidDesign(e.to_string()))?;
        CouplerModel::calibrated(
            self.feedline_impedance_ohm,
            props.impedance_z0,
            self.calibration(),
        )
        .map_err(|e| LayoutError::InvalidDesign(e.to_string()))
    }

    /// Resonator labels in schedule order.
    pub fn labels(&self) -> Vec<String> {
        (0..self.resonator_f0_ghz.len())
            .map(|i| format!("r{i}"))
            .collect()
    }
}

/// Tapered launch pad at each end of the feedline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondPadSpec {
    pub trace_width: f64,
    pub gap: f64,
    pub length: f64,
    pub taper_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedline {
    /// Centerline height, µm.
    pub y: f64,
    pub cpw: CpwGeometry,
    pub pad: BondPadSpec,
}

impl Feedline {
    pub fn straight_span(&self, chip_width: f64) -> (f64, f64) {
        let x0 = self.pad.length + self.pad.taper_length;
        (x0, chip_width - x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    AboveFeedline,
    BelowFeedline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedResonator {
    pub design: ResonatorDesign,
    pub transform: Transform,
    pub side: Side,
}

impl PlacedResonator {
    pub fn chip_bbox(&self) -> BBox {
        self.transform.apply_box(&self.design.local_bbox())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub text: String,
    /// Lower-left corner, µm.
    pub position: Point,
    pub height: f64,
}

impl Label {
    pub fn bbox(&self) -> BBox {
        BBox {
            min: self.position,
            max: Point::new(
                self.position.x + font::text_width(&self.text, self.height),
                self.position.y + self.height,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipDesign {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub feedline: Feedline,
    pub resonators: Vec<PlacedResonator>,
    pub labels: Vec<Label>,
    pub polarity: Polarity,
    pub min_feature: f64,
}

impl ChipDesign {
    pub fn bounds(&self) -> BBox {
        BBox {
            min: Point::new(0.0, 0.0),
            max: Point::new(self.width, self.height),
        }
    }
}

const LABEL_GAP_UM: f64 = 100.0;
const EDGE_MARGIN_UM: f64 = 100.0;

/// Plans and places every resonator described by `cfg`.
pub fn build_chip(cfg: &ChipConfig) -> Result<ChipDesign, LayoutError> {
    let cpw = cfg.cpw();
    cpw.validate(cfg.min_feature_um)
        .map_err(|e| LayoutError::InvalidDesign(e.to_string()))?;
    if cfg.resonator_qc.len() != cfg.resonator_f0_ghz.len() {
        return Err(LayoutError::InvalidDesign(format!(
            "{} resonator frequencies but {} Qc targets",
            cfg.resonator_f0_ghz.len(),
            cfg.resonator_qc.len()
        )));
    }
    if !font::supports(&cfg.name) {
        return Err(LayoutError::InvalidDesign(format!(
            "design name {:?} has unsupported glyphs",
            cfg.name
        )));
    }
    let pad = BondPadSpec {
        trace_width: cfg.pad_trace_width_um,
        gap: cfg.pad_gap_um,
        length: cfg.pad_length_um,
        taper_length: cfg.taper_length_um,
    };
    let feedline = Feedline {
        y: cfg.height_um / 2.0,
        cpw,
        pad,
    };
    let (x0, x1) = feedline.straight_span(cfg.width_um);
    if x1 <= x0 {
        return Err(LayoutError::InvalidDesign(
            "bond pads leave no room for the feedline".into(),
        ));
    }
    let model = cfg.coupler_model()?;
    let hw = cpw.trace_width_s / 2.0 + cpw.gap_width_g;
    let y_coupler = 2.0 * hw + cfg.coupler_ground_strip_um;
    let max_height =
        cfg.height_um / 2.0 - y_coupler - cfg.label_height_um - LABEL_GAP_UM - EDGE_MARGIN_UM;
    let limits = MeanderLimits {
        pitch: cfg.meander_pitch_um,
        width: cfg.meander_width_um,
        lead: cfg.lead_length_um,
        min_run: 10.0,
        max_height,
    };

    let n = cfg.resonator_f0_ghz.len();
    let slots = n.div_ceil(2).max(1);
    let slot_w = (x1 - x0) / slots as f64;
    let mut resonators = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n + 2);
    for (i, label) in cfg.labels().iter().enumerate() {
        let f0 = cfg.resonator_f0_ghz[i];
        let infeasible = |reason: String| LayoutError::Infeasible {
            label: label.clone(),
            reason,
        };
        let coupler = model
            .length_for_qc_with_min(cfg.resonator_qc[i], f0, cfg.min_feature_um)
            .map_err(|e| infeasible(e.to_string()))?;
        if coupler > slot_w {
            return Err(infeasible(format!(
                "coupler length {coupler:.1} µm exceeds the available feedline segment {slot_w:.1} µm"
            )));
        }
        let design = plan_resonator(
            label,
            f0,
            coupler,
            &cpw,
            &limits,
            cfg.fillet_radius_um,
            cfg.coupler_ground_strip_um,
        )?;
        let lb = design.local_bbox();
        if lb.width() > slot_w - 2.0 * cfg.min_feature_um {
            return Err(infeasible(format!(
                "envelope width {:.0} µm does not fit the {slot_w:.0} µm slot",
                lb.width()
            )));
        }
        let cx = x0 + (i / 2) as f64 * slot_w + slot_w / 2.0;
        let dx = cx - (lb.min.x + lb.max.x) / 2.0;
        let (side, transform) = if i % 2 == 0 {
            (
                Side::AboveFeedline,
                Transform {
                    offset: Point::new(dx, feedline.y + y_coupler),
                    mirror_y: false,
                },
            )
        } else {
            (
                Side::BelowFeedline,
                Transform {
                    offset: Point::new(dx, feedline.y - y_coupler),
                    mirror_y: true,
                },
            )
        };
        let placed = PlacedResonator {
            design,
            transform,
            side,
        };
        let bb = placed.chip_bbox();
        let text = label.to_uppercase();
        let tw = font::text_width(&text, cfg.label_height_um);
        let ly = match side {
            Side::AboveFeedline => bb.max.y + LABEL_GAP_UM,
            Side::BelowFeedline => bb.min.y - LABEL_GAP_UM - cfg.label_height_um,
        };
        labels.push(Label {
            text,
            position: Point::new(cx - tw / 2.0, ly),
            height: cfg.label_height_um,
        });
        resonators.push(placed);
    }

    labels.push(Label {
        text: cfg.name.to_uppercase(),
        position: Point::new(
            EDGE_MARGIN_UM,
            cfg.height_um - EDGE_MARGIN_UM - cfg.label_height_um,
        ),
        height: cfg.label_height_um,
    });
    labels.push(Label {
        text: "FEED".into(),
        position: Point::new(
            EDGE_MARGIN_UM,
            feedline.y + pad.trace_width / 2.0 + pad.gap + LABEL_GAP_UM,
        ),
        height: cfg.label_height_um,
    });

    Ok(ChipDesign {
        name: cfg.name.clone(),
        width: cfg.width_um,
        height: cfg.height_um,
        feedline,
        resonators,
        labels,
        polarity: cfg.polarity,
        min_feature: cfg.min_feature_um,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Feedline,
    Resonator(usize),
    Label(usize),
}

/// Flattened etch geometry in deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedChip {
    pub polygons: Vec<Polygon>,
    pub owners: Vec<Owner>,
    pub bounds: BBox,
}

impl RenderedChip {
    pub fn total_area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }
}

fn feedline_polygons(f: &Feedline, width: f64) -> Vec<Polygon> {
    let y = f.y;
    let (ps, pg) = (f.pad.trace_width / 2.0, f.pad.gap);
    let (s, g) = (f.cpw.trace_width_s / 2.0, f.cpw.gap_width_g);
    let (x0, x1) = f.straight_span(width);
    let xp = f.pad.length;
    let mut out = Vec::with_capacity(10);
    for sign in [1.0, -1.0] {
        let band = |inner: f64, w: f64| (y + sign * inner, y + sign * (inner + w));
        let (pa, pb) = band(ps, pg);
        let (fa, fb) = band(s, g);
        out.push(Polygon::rect(0.0, pa, xp, pb));
        out.push(Polygon::new(vec![
            Point::new(xp, pa),
            Point::new(x0, fa),
            Point::new(x0, fb),
            Point::new(xp, pb),
        ]));
        out.push(Polygon::rect(x0, fa, x1, fb));
        out.push(Polygon::new(vec![
            Point::new(x1, fa),
            Point::new(width - xp, pa),
            Point::new(width - xp, pb),
            Point::new(x1, fb),
        ]));
        out.push(Polygon::rect(width - xp, pa, width, pb));
    }
    out
}

/// Flattens the design into etch polygons and checks for conflicts.
pub fn render_chip(design: &ChipDesign) -> Result<RenderedChip, LayoutError> {
    let mut polygons = Vec::new();
    let mut owners = Vec::new();
    let bounds = design.bounds();

    for p in feedline_polygons(&design.feedline, design.width) {
        polygons.push(p);
        owners.push(Owner::Feedline);
    }
    for (i, r) in design.resonators.iter().enumerate() {
        for p in r.design.polygons() {
            polygons.push(p.transformed(&r.transform));
            owners.push(Owner::Resonator(i));
        }
    }
    for (i, l) in design.labels.iter().enumerate() {
        for p in font::render_text(&l.text, l.position.x, l.position.y, l.height) {
            polygons.push(p);
            owners.push(Owner::Label(i));
        }
    }

    // keep-out boxes: resonators, labels and the feedline band
    let f = &design.feedline;
    let band = f.pad.trace_width / 2.0 + f.pad.gap;
    let mut boxes: Vec<(String, BBox)> = vec![(
        "feedline".into(),
        BBox {
            min: Point::new(0.0, f.y - band),
            max: Point::new(design.width, f.y + band),
        },
    )];
    for r in &design.resonators {
        boxes.push((r.design.label.clone(), r.chip_bbox()));
    }
    for l in &design.labels {
        boxes.push((format!("label {:?}", l.text), l.bbox()));
    }
    for (i, (na, a)) in boxes.iter().enumerate() {
        if !bounds.contains_box(a) {
            return Err(LayoutError::GeometryConflict(format!(
                "{na} extends outside the chip"
            )));
        }
        for (nb, b) in &boxes[i + 1..] {
            // resonators legitimately hug the feedline via the coupler
            if i == 0 && design.resonators.iter().any(|r| &r.design.label == nb) {
                continue;
            }
            if a.intersects(b) {
                return Err(LayoutError::GeometryConflict(format!("{na} overlaps {nb}")));
            }
        }
    }
    for (i, p) in polygons.iter().enumerate() {
        if p.self_intersects() {
            return Err(LayoutError::GeometryConflict(format!(
                "polygon {i} ({:?}) self-intersects",
                owners[i]
            )));
        }
        if !bounds.expand(1e-9).contains_box(&p.bbox()) {
            return Err(LayoutError::GeometryConflict(format!(
                "polygon {i} ({:?}) leaves the chip",
                owners[i]
            )));
        }
    }
    Ok(RenderedChip {
        polygons,
        owners,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chip_builds() {
        let d = build_chip(&ChipConfig::default()).unwrap();
        assert_eq!(d.resonators.len(), 8);
        assert_eq!((d.width, d.height), (7500.0, 7500.0));
        let r = render_chip(&d).unwrap();
        assert!(r.polygons.len() > 100);
        assert_eq!(r.polygons.len(), r.owners.len());
    }

    #[test]
    fn coupler_lengths_follow_calibration() {
        let d = build_chip(&ChipConfig::default()).unwrap();
        assert!((d.resonators[0].design.coupler_length - 200.0).abs() < 1e-9);
        // higher f0 and similar Qc need a shorter arm
        assert!(d.resonators[7].design.coupler_length < d.resonators[0].design.coupler_length);
    }

    #[test]
    fn mismatched_lists_rejected() {
        let cfg = ChipConfig {
            resonator_qc: vec![5e5],
            ..ChipConfig::default()
        };
        assert!(matches!(
            build_chip(&cfg),
            Err(LayoutError::InvalidDesign(_))
        ));
    }

    #[test]
    fn overlapping_resonators_conflict() {
        let mut d = build_chip(&ChipConfig::default()).unwrap();
        d.resonators[2].transform = d.resonators[0].transform;
        assert!(matches!(
            render_chip(&d),
            Err(LayoutError::GeometryConflict(_))
        ));
    }

    #[test]
    fn long_coupler_is_infeasible() {
        let mut cfg = ChipConfig::default();
        cfg.resonator_f0_ghz[0] = 9.0;
        cfg.resonator_qc[0] = 1e3;
        let err = build_chip(&cfg).unwrap_err();
        assert!(
            matches!(err, LayoutError::Infeasible { ref label, .. } if label == "r0"),
            "{err}"
        );
    }

    #[test]
    fn no_resonators_still_renders() {
        let cfg = ChipConfig {
            resonator_f0_ghz: vec![],
            resonator_qc: vec![],
            ..ChipConfig::default()
        };
        let r = render_chip(&build_chip(&cfg).unwrap()).unwrap();
        assert!(r.owners.iter().all(|o| !matches!(o, Owner::Resonator(_))));
    }
}
