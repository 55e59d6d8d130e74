//! Chip geometry generation and the file formats and checks built on it.

pub mod chip;
pub mod connectivity;
pub mod drc;
pub mod font;
pub mod gdsii;
pub mod geometry;
pub mod resonator;
pub mod svg;
pub mod wirebond;

pub use chip::{
    build_chip, render_chip, ChipConfig, ChipDesign, Polarity, RenderedChip, Substrate,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("resonator {label} cannot be laid out: {reason}")]
    Infeasible { label: String, reason: String },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("geometry conflict: {0}")]
    GeometryConflict(String),
    #[error(transparent)]
    Gds(#[from] gdsii::GdsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Every artifact derived from one chip configuration.
#[derive(Debug, Clone)]
pub struct ChipArtifacts {
    pub design: ChipDesign,
    pub rendered: RenderedChip,
    pub gds: Vec<u8>,
    pub svg: String,
    pub wirebonds: wirebond::WirebondMap,
    pub drc: drc::DrcReport,
    pub ground: connectivity::ConnectivityReport,
}

/// Builds, renders, checks and serializes a chip.
///
/// The design-rule scan runs on the polygons read back from the GDSII
/// stream, so it sees the snapped coordinates that a mask shop would.
pub fn generate(
    cfg: &ChipConfig,
    rules: &wirebond::WirebondRules,
) -> Result<ChipArtifacts, LayoutError> {
    let design = build_chip(cfg)?;
    let rendered = render_chip(&design)?;
    let gds = gdsii::write_library(&gdsii::chip_library(&design, &rendered)?)?;
    let drc = drc::check(
        &gdsii::library_polygons(&gdsii::read_library(&gds)?),
        design.min_feature,
    );
    let svg = svg::render_svg(&design, &rendered);
    let raster = connectivity::MetalRaster::build(&rendered);
    let wirebonds = wirebond::plan_wirebonds(&design, &rendered, &raster, rules);
    let ground = wirebond::check_ground(&design, &raster, &wirebonds);
    Ok(ChipArtifacts {
        design,
        rendered,
        gds,
        svg,
        wirebonds,
        drc,
        ground,
    })
}
