//! Quasi-static cross-section of a trenched CPW: potential, capacitance per
//! length and the participation of thin lossy layers at each interface.
//!
//! Lengths are in µm throughout; thin-layer thicknesses and trench depth
//! are configured in nm.

pub mod export;
pub mod mesh;
pub mod ratios;
pub mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpw_analytics::CpwGeometry;
use mesh::{build_mesh, Boundary, Bulk, Domain, Medium, Rect};
pub use ratios::{participation_ratios, ParticipationReport};
pub use solver::{FieldSolution, SolverOptions};

/// Largest allowed thin-layer thickness, nm.
pub const MAX_LAYER_NM: f64 = 100.0;
/// Default cell budget.
pub const DEFAULT_MAX_CELLS: usize = 4_000_000;

#[derive(Debug, Error)]
pub enum ParticipationError {
    #[error("invalid cross-section: {0}")]
    InvalidModel(String),
    #[error(
        "refinement level {level} needs {cells} cells, over the budget of {budget}{}",
        match suggested_level { Some(l) => format!("; level {l} fits"), None => String::new() }
    )]
    MeshBudget {
        level: u32,
        cells: usize,
        budget: usize,
        suggested_level: Option<u32>,
    },
    #[error("solver failed: {reason}")]
    Solver { reason: String, residuals: Vec<f64> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrenchProfile {
    /// Floor lowered by the depth plus a quarter-round undercut of the
    /// same radius beneath both metal edges.
    Isotropic,
    /// Floor lowered by the depth, vertical walls at the metal edges.
    Vertical,
}

/// Geometry, thin layers and numerics of one cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossSectionModel {
    pub trace_width_um: f64,
    pub gap_width_um: f64,
    pub substrate_eps_r: f64,
    pub metal_thickness_um: f64,
    pub trench_depth_nm: f64,
    pub trench_profile: TrenchProfile,
    /// Staircase bands approximating a curved undercut.
    pub trench_steps: u32,
    pub ms_thickness_nm: f64,
    pub sa_thickness_nm: f64,
    pub ma_thickness_nm: f64,
    pub ms_eps_r: f64,
    pub sa_eps_r: f64,
    pub ma_eps_r: f64,
    /// Box width as a multiple of `s + 2g`; depth and height are half of it.
    pub domain_extent_factor: f64,
    /// Neighbouring cell size ratio limit.
    pub growth: f64,
    pub max_cells: usize,
}

impl Default for CrossSectionModel {
    fn default() -> Self {
        Self::from_cpw(&CpwGeometry::default())
    }
}

impl CrossSectionModel {
    pub fn from_cpw(cpw: &CpwGeometry) -> Self {
        Self {
            trace_width_um: cpw.trace_width_s,
            gap_width_um: cpw.gap_width_g,
            substrate_eps_r: cpw.substrate_eps_r,
            metal_thickness_um: cpw.metal_thickness,
            trench_depth_nm: cpw.trench_depth,
            trench_profile: TrenchProfile::Isotropic,
            trench_steps: 4,
            ms_thickness_nm: 3.0,
            sa_thickness_nm: 3.0,
            ma_thickness_nm: 3.0,
            ms_eps_r: 10.0,
            sa_eps_r: 10.0,
            ma_eps_r: 10.0,
            domain_extent_factor: 30.0,
            growth: 1.5,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }

    /// Copy with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            trace_width_um: self.trace_width_um * k,
            gap_width_um: self.gap_width_um * k,
            metal_thickness_um: self.metal_thickness_um * k,
            trench_depth_nm: self.trench_depth_nm * k,
            ms_thickness_nm: self.ms_thickness_nm * k,
            sa_thickness_nm: self.sa_thickness_nm * k,
            ma_thickness_nm: self.ma_thickness_nm * k,
            ..self.clone()
        }
    }

    /// Copy with all three thin layers set to `t_nm`.
    pub fn with_layer_thickness(&self, t_nm: f64) -> Self {
        Self {
            ms_thickness_nm: t_nm,
            sa_thickness_nm: t_nm,
            ma_thickness_nm: t_nm,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ParticipationError> {
        let bad = |m: String| Err(ParticipationError::InvalidModel(m));
        let positive = [
            ("trace width", self.trace_width_um),
            ("gap width", self.gap_width_um),
            ("substrate permittivity", self.substrate_eps_r),
            ("metal thickness", self.metal_thickness_um),
            ("MS permittivity", self.ms_eps_r),
            ("SA permittivity", self.sa_eps_r),
            ("MA permittivity", self.ma_eps_r),
            ("domain extent factor", self.domain_extent_factor),
        ];
        for (what, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{what} must be positive, got {v}"));
            }
        }
        for (what, t) in [
            ("MS", self.ms_thickness_nm),
            ("SA", self.sa_thickness_nm),
            ("MA", self.ma_thickness_nm),
        ] {
            if !(0.0..=MAX_LAYER_NM).contains(&t) {
                return bad(format!(
                    "{what} layer thickness {t} nm must lie in [0, {MAX_LAYER_NM}]"
                ));
            }
        }
        if !(self.trench_depth_nm >= 0.0) {
            return bad(format!(
                "trench depth {} nm must be non-negative",
                self.trench_depth_nm
            ));
        }
        let d = self.trench_depth_nm * 1e-3;
        if self.trench_profile == TrenchProfile::Isotropic
            && d >= 0.5 * self.trace_width_um.min(self.gap_width_um)
        {
            return bad("undercut would meet the opposite edge".into());
        }
        if self.trench_steps == 0 {
            return bad("trench needs at least one step".into());
        }
        if !(self.growth > 1.0 && self.growth <= 4.0) {
            return bad(format!("growth {} must lie in (1, 4]", self.growth));
        }
        if self.domain_extent_factor < 2.0 {
            return bad("domain must be wider than the CPW".into());
        }
        Ok(())
    }

    /// Coarsest-level cell size at features, µm.
    pub fn base_cell(&self) -> f64 {
        let t = self
            .ms_thickness_nm
            .max(self.sa_thickness_nm)
            .max(self.ma_thickness_nm);
        let t = if t > 0.0 { t } else { 3.0 };
        // the default ladder reaches t/2 at level 2
        2.0 * t * 1e-3
    }

    /// Box, media and grading of the cross-section.
    pub fn domain(&self) -> Result<Domain, ParticipationError> {
        self.validate()?;
        let (s2, g) = (self.trace_width_um / 2.0, self.gap_width_um);
        let half = self.domain_extent_factor * (2.0 * s2 + 2.0 * g) / 2.0;
        let vacuum = Medium::Dielectric {
            eps_r: 1.0,
            bulk: Bulk::Vacuum,
        };
        let substrate = Medium::Dielectric {
            eps_r: self.substrate_eps_r,
            bulk: Bulk::Substrate,
        };
        let mut rects = vec![(Rect::new(-half, -half, half, 0.0), substrate)];
        let d = self.trench_depth_nm * 1e-3;
        if d > 0.0 {
            let bands: Vec<(f64, f64, f64)> = match self.trench_profile {
                TrenchProfile::Vertical => vec![(-d, 0.0, 0.0)],
                TrenchProfile::Isotropic => {
                    let n = self.trench_steps as f64;
                    (1..=self.trench_steps)
                        .map(|k| {
                            let (lo, hi) = (-d * k as f64 / n, -d * (k - 1) as f64 / n);
                            let ym = 0.5 * (lo + hi);
                            (lo, hi, (d * d - ym * ym).sqrt())
                        })
                        .collect()
                }
            };
            for (lo, hi, w) in bands {
                rects.push((Rect::new(s2 - w, lo, s2 + g + w, hi), vacuum));
                rects.push((Rect::new(-s2 - g - w, lo, -s2 + w, hi), vacuum));
            }
        }
        let t = self.metal_thickness_um;
        rects.push((Rect::new(-s2, 0.0, s2, t), Medium::Conductor(0)));
        rects.push((Rect::new(s2 + g, 0.0, half, t), Medium::Conductor(1)));
        rects.push((Rect::new(-half, 0.0, -s2 - g, t), Medium::Conductor(1)));
        Ok(Domain {
            bounds: Rect::new(-half, -half, half, half),
            background: vacuum,
            rects,
            potentials: vec![1.0, 0.0],
            sides: [Boundary::Grounded; 4],
            h_min: self.base_cell(),
            h_max: 2.0 * half / 50.0,
            growth: self.growth,
            mirror_x: Some(0.0),
            x_keys: vec![],
            y_keys: vec![],
        })
    }
}

/// One solved refinement level.
#[derive(Debug, Clone)]
pub struct ParticipationRun {
    pub report: ParticipationReport,
    pub solution: FieldSolution,
    /// Reports of every coarser level, coarsest first.
    pub ladder: Vec<ParticipationReport>,
}

/// Solves the model at `level` and reports participations.
///
/// The discretization error estimate is the largest relative change of
/// any reported quantity from the next coarser level (or, at level 0,
/// to the next finer one).
pub fn run(model: &CrossSectionModel, level: u32) -> Result<ParticipationRun, ParticipationError> {
    let domain = model.domain()?;
    let top = level.max(1);
    build_mesh(&domain, level, model.max_cells)?;
    let meshes = (0..=top)
        .map(|l| build_mesh(&domain, l, usize::MAX))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sols = solver::solve_ladder(&domain, meshes, &SolverOptions::default())?;
    let mut reports: Vec<ParticipationReport> = sols
        .iter()
        .map(|s| participation_ratios(s, model))
        .collect::<Result<_, _>>()?;
    for k in 0..reports.len() {
        let other = if k == 0 { 1 } else { k - 1 };
        reports[k].estimated_discretization_error = reports[k].relative_change(&reports[other]);
    }
    sols.truncate(level as usize + 1);
    reports.truncate(level as usize + 1);
    let solution = sols.pop().unwrap();
    let report = reports.pop().unwrap();
    Ok(ParticipationRun {
        report,
        solution,
        ladder: reports,
    })
}
