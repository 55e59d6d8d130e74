//! Closed-schema run configuration shared by every command.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::wirebond::WirebondRules;
use crate::layout::ChipConfig;
use crate::participation::export::FieldFormat;
use crate::participation::{CrossSectionModel, TrenchProfile, DEFAULT_MAX_CELLS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

/// Everything a run needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every stochastic output (synthetic traces).
    pub seed: u64,
    pub output: OutputConfig,
    pub chip: ChipConfig,
    pub wirebonds: WirebondRules,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
    pub participation: ParticipationConfig,
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output: OutputConfig::default(),
            chip: ChipConfig::default(),
            wirebonds: WirebondRules::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepConfig::default(),
            participation: ParticipationConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Adjacent-resonance spacing over linewidth per row.
    pub crosstalk: bool,
    /// Aligned text table next to the CSV.
    pub text_table: bool,
    /// Multiplexed S21 of the designed chip, for closing the loop with `fit`.
    pub synthetic_trace: bool,
    pub synthetic_q_internal: f64,
    pub synthetic_noise_std: f64,
    /// Uniform samples across the band (dense windows are added per dip).
    pub synthetic_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            crosstalk: true,
            text_table: true,
            synthetic_trace: true,
            synthetic_q_internal: 5e5,
            synthetic_noise_std: 1e-4,
            synthetic_points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_length_um: f64,
    pub max_length_um: f64,
    /// Log-spaced points per resonator.
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_length_um: 10.0,
            max_length_um: 1000.0,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticipationConfig {
    pub refinement: u32,
    /// Also report every coarser level as a convergence table.
    pub ladder: bool,
    pub field_maps: Vec<FieldFormat>,
    pub trench_profile: TrenchProfile,
    pub trench_steps: u32,
    pub ms_thickness_nm: f64,
    pub sa_thickness_nm: f64,
    pub ma_thickness_nm: f64,
    pub ms_eps_r: f64,
    pub sa_eps_r: f64,
    pub ma_eps_r: f64,
    pub domain_extent_factor: f64,
    pub growth: f64,
    pub max_cells: usize,
}

impl Default for ParticipationConfig {
    fn default() -> Self {
        let m = CrossSectionModel::default();
        Self {
            refinement: 2,
            ladder: false,
            field_maps: vec![FieldFormat::Vtk],
            trench_profile: m.trench_profile,
            trench_steps: m.trench_steps,
            ms_thickness_nm: m.ms_thickness_nm,
            sa_thickness_nm: m.sa_thickness_nm,
            ma_thickness_nm: m.ma_thickness_nm,
            ms_eps_r: m.ms_eps_r,
            sa_eps_r: m.sa_eps_r,
            ma_eps_r: m.ma_eps_r,
            domain_extent_factor: m.domain_extent_factor,
            growth: m.growth,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Half-width of each fit window in detected linewidths.
    pub window_linewidths: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            window_linewidths: 5.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cross-section of the chip's CPW with the participation settings.
    pub fn cross_section(&self) -> CrossSectionModel {
        let p = &self.participation;
        CrossSectionModel {
            trench_profile: p.trench_profile,
            trench_steps: p.trench_steps,
            ms_thickness_nm: p.ms_thickness_nm,
            sa_thickness_nm: p.sa_thickness_nm,
            ma_thickness_nm: p.ma_thickness_nm,
            ms_eps_r: p.ms_eps_r,
            sa_eps_r: p.sa_eps_r,
            ma_eps_r: p.ma_eps_r,
            domain_extent_factor: p.domain_extent_factor,
            growth: p.growth,
            max_cells: p.max_cells,
            ..CrossSectionModel::from_cpw(&self.chip.cpw())
        }
    }

    /// Checks that do not need a geometry build.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let c = &self.chip;
        if c.resonator_f0_ghz.len() != c.resonator_qc.len() {
            return bad(format!(
                "chip.resonator_f0_ghz has {} entries but chip.resonator_qc has {}",
                c.resonator_f0_ghz.len(),
                c.resonator_qc.len()
            ));
        }
        let s = &self.sweep;
        if !(s.min_length_um > 0.0 && s.max_length_um >= s.min_length_um) || s.points == 0 {
            return bad("sweep needs 0 < min_length_um <= max_length_um and points >= 1".into());
        }
        let a = &self.analysis;
        if !(a.synthetic_q_internal > 0.0)
            || !(a.synthetic_noise_std >= 0.0)
            || a.synthetic_points < 2
        {
            return bad("analysis synthetic settings must be positive".into());
        }
        if !(self.fit.window_linewidths > 0.0) || self.fit.max_iterations == 0 {
            return bad("fit window and iteration cap must be positive".into());
        }
        self.cross_section()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
