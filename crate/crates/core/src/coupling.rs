//! Inductive coupling of a quarter-wave resonator to the feedline.
//!
//! The shorted end of each resonator runs parallel to the feedline for a
//! coupler length `l_c`. With a lumped mutual inductance `M = m * l_c` the
//! standing-wave energy leaks into the matched feedline at a rate giving
//! `Qc = pi * Z_f * Z_r / (2 * omega^2 * M^2)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

use crate::cpw_analytics::DEFAULT_MIN_FEATURE_UM;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("coupler length {length_um:.4} µm is below the smallest feature {min_um} µm")]
    BelowMinFeature { length_um: f64, min_um: f64 },
    #[error("crosstalk estimate needs at least two resonators")]
    TooFewResonators,
    #[error("resonator frequencies must be sorted ascending")]
    Unsorted,
    #[error("frequency and decay-rate lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn positive(what: &'static str, value: f64) -> Result<f64, CouplingError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CouplingError::NonPositive { what, value })
    }
}

/// One published resonator row: label, f0 (MHz), decay rate (MHz), Qc.
#[derive(Debug, Clone, Copy)]
pub struct PublishedResonator {
    pub label: &'static str,
    pub f0_mhz: f64,
    pub decay_rate_mhz: f64,
    pub qc: f64,
}

/// Simulated parameters of the eight resonators on the reference chip.
pub const REFERENCE_RESONATORS: [PublishedResonator; 8] = [
    PublishedResonator {
        label: "r0",
        f0_mhz: 4600.0,
        decay_rate_mhz: 0.0094,
        qc: 495e3,
    },
    PublishedResonator {
        label: "r1",
        f0_mhz: 5000.0,
        decay_rate_mhz: 0.0102,
        qc: 496e3,
    },
    PublishedResonator {
        label: "r2",
        f0_mhz: 5400.0,
        decay_rate_mhz: 0.0110,
        qc: 497e3,
    },
    PublishedResonator {
        label: "r3",
        f0_mhz: 5800.0,
        decay_rate_mhz: 0.0118,
        qc: 499e3,
    },
    PublishedResonator {
        label: "r4",
        f0_mhz: 6200.0,
        decay_rate_mhz: 0.0126,
        qc: 497e3,
    },
    PublishedResonator {
        label: "r5",
        f0_mhz: 6600.0,
        decay_rate_mhz: 0.0134,
        qc: 498e3,
    },
    PublishedResonator {
        label: "r6",
        f0_mhz: 7000.0,
        decay_rate_mhz: 0.0142,
        qc: 499e3,
    },
    PublishedResonator {
        label: "r7",
        f0_mhz: 7400.0,
        decay_rate_mhz: 0.0146,
        qc: 512e3,
    },
];

/// Calibration anchor: the model reproduces `qc` at (`length_um`, `f_ghz`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub length_um: f64,
    pub qc: f64,
    pub f_ghz: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            length_um: 200.0,
            qc: 495e3,
            f_ghz: 4.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerModel {
    /// pH/µm.
    pub mutual_inductance_per_length: f64,
    pub feedline_impedance: f64,
    pub resonator_impedance: f64,
    pub reference: Calibration,
}

impl CouplerModel {
    /// Solves for the mutual inductance per length that reproduces the anchor.
    pub fn calibrated(
        feedline_impedance: f64,
        resonator_impedance: f64,
        reference: Calibration,
    ) -> Result<Self, CouplingError> {
        positive("feedline impedance", feedline_impedance)?;
        positive("resonator impedance", resonator_impedance)?;
        positive("reference length", reference.length_um)?;
        positive("reference Qc", reference.qc)?;
        let omega = 2.0 * PI * positive("reference frequency", reference.f_ghz)? * 1e9;
        let m_total = (PI * feedline_impedance * resonator_impedance
            / (2.0 * omega * omega * reference.qc))
            .sqrt();
        Ok(Self {
            mutual_inductance_per_length: m_total * 1e12 / reference.length_um,
            feedline_impedance,
            resonator_impedance,
            reference,
        })
    }

    fn zz(&self) -> f64 {
        self.feedline_impedance * self.resonator_impedance
    }

    /// Qc at coupler length `length_um` and resonance `f0_ghz`.
    pub fn qc(&self, length_um: f64, f0_ghz: f64) -> Result<f64, CouplingError> {
        let length = positive("coupler length", length_um)?;
        let omega = 2.0 * PI * positive("frequency", f0_ghz)? * 1e9;
        let m = self.mutual_inductance_per_length * 1e-12 * length;
        Ok(PI * self.zz() / (2.0 * omega * omega * m * m))
    }

    /// Coupler length (µm) giving `target_qc` at `f0_ghz`.
    pub fn length_for_qc(&self, target_qc: f64, f0_ghz: f64) -> Result<f64, CouplingError> {
        self.length_for_qc_with_min(target_qc, f0_ghz, DEFAULT_MIN_FEATURE_UM)
    }

    pub fn length_for_qc_with_min(
        &self,
        target_qc: f64,
        f0_ghz: f64,
        min_feature_um: f64,
    ) -> Result<f64, CouplingError> {
        let qc = positive("target Qc", target_qc)?;
        let omega = 2.0 * PI * positive("frequency", f0_ghz)? * 1e9;
        let m = (PI * self.zz() / (2.0 * omega * omega * qc)).sqrt();
        let length_um = m * 1e12 / self.mutual_inductance_per_length;
        if length_um < min_feature_um {
            return Err(CouplingError::BelowMinFeature {
                length_um,
                min_um: min_feature_um,
            });
        }
        Ok(length_um)
    }
}

/// Free function form of [`CouplerModel::qc`].
pub fn qc_of_coupler_length(
    model: &CouplerModel,
    length_um: f64,
    f0_ghz: f64,
) -> Result<f64, CouplingError> {
    model.qc(length_um, f0_ghz)
}

pub fn coupler_length_for_qc(
    model: &CouplerModel,
    target_qc: f64,
    f0_ghz: f64,
) -> Result<f64, CouplingError> {
    model.length_for_qc(target_qc, f0_ghz)
}

/// Coupling-limited linewidth `f0 / Qc`, in the units of `f0`.
pub fn decay_rate(f0_mhz: f64, qc: f64) -> Result<f64, CouplingError> {
    Ok(positive("frequency", f0_mhz)? / positive("Qc", qc)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    MetalSubstrate,
    SubstrateAir,
    MetalAir,
    Substrate,
}

impl Region {
    pub const ALL: [Region; 4] = [
        Region::MetalSubstrate,
        Region::SubstrateAir,
        Region::MetalAir,
        Region::Substrate,
    ];
}

/// Participations and loss tangents for the four lossy regions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBudget {
    /// Indexed like [`Region::ALL`].
    pub participation: [f64; 4],
    pub loss_tangent: [f64; 4],
}

impl LossBudget {
    pub fn new(participation: [f64; 4], loss_tangent: [f64; 4]) -> Result<Self, CouplingError> {
        for &v in participation.iter().chain(loss_tangent.iter()) {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CouplingError::NonPositive {
                    what: "participation or loss tangent",
                    value: v,
                });
            }
        }
        Ok(Self {
            participation,
            loss_tangent,
        })
    }

    pub fn get(&self, region: Region) -> (f64, f64) {
        let i = region as usize;
        (self.participation[i], self.loss_tangent[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsLoss {
    pub delta: f64,
    /// `1 / delta`; infinite when the budget is lossless.
    pub q_tls: f64,
}

/// Forward loss budget: `delta_TLS = sum_j p_j * delta_j`.
pub fn tls_loss(budget: &LossBudget) -> TlsLoss {
    let delta = budget
        .participation
        .iter()
        .zip(&budget.loss_tangent)
        .map(|(p, d)| p * d)
        .sum::<f64>();
    TlsLoss {
        delta,
        q_tls: 1.0 / delta,
    }
}

/// Ratio below which adjacent resonances are flagged as overlapping.
pub const CROSSTALK_FLAG_RATIO: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkPair {
    pub lower: usize,
    pub upper: usize,
    /// Frequency spacing over the larger linewidth.
    pub ratio: f64,
    pub flagged: bool,
}

/// Spacing-to-linewidth ratios for adjacent resonator pairs.
///
/// `frequencies_ghz` must be sorted ascending; `decay_rates_mhz` are the
/// matching linewidths.
pub fn crosstalk_estimate(
    frequencies_ghz: &[f64],
    decay_rates_mhz: &[f64],
) -> Result<Vec<CrosstalkPair>, CouplingError> {
    if frequencies_ghz.len() != decay_rates_mhz.len() {
        return Err(CouplingError::LengthMismatch(
            frequencies_ghz.len(),
            decay_rates_mhz.len(),
        ));
    }
    if frequencies_ghz.len() < 2 {
        return Err(CouplingError::TooFewResonators);
    }
    if frequencies_ghz.windows(2).any(|w| w[1] < w[0]) {
        return Err(CouplingError::Unsorted);
    }
    Ok(frequencies_ghz
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let spacing_mhz = (w[1] - w[0]) * 1e3;
            let kappa = decay_rates_mhz[i].max(decay_rates_mhz[i + 1]);
            let ratio = if spacing_mhz == 0.0 {
                0.0
            } else {
                spacing_mhz / kappa
            };
            CrosstalkPair {
                lower: i,
                upper: i + 1,
                ratio,
                flagged: ratio < CROSSTALK_FLAG_RATIO,
            }
        })
        .collect())
}

/// One point of a coupler-length sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub resonator_label: String,
    pub coupler_length_um: f64,
    pub qc: f64,
    #[serde(rename = "f0_GHz")]
    pub f0_ghz: f64,
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Qc over the given coupler lengths for each `(label, f0_ghz)` resonator.
pub fn sweep_coupler_lengths(
    model: &CouplerModel,
    resonators: &[(String, f64)],
    lengths_um: &[f64],
) -> Result<Vec<SweepRow>, CouplingError> {
    let mut rows = Vec::with_capacity(resonators.len() * lengths_um.len());
    for (label, f0) in resonators {
        for &l in lengths_um {
            let qc = model.qc(l, *f0)?;
            rows.push(SweepRow {
                resonator_label: label.clone(),
                coupler_length_um: l,
                qc,
                f0_ghz: *f0,
                kappa_mhz: decay_rate(f0 * 1e3, qc)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), CouplingError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "resonator_label",
        "coupler_length_um",
        "qc",
        "f0_GHz",
        "kappa_MHz",
    ])?;
    for r in rows {
        w.write_record([
            r.resonator_label.clone(),
            format!("{}", r.coupler_length_um),
            format!("{}", r.qc),
            format!("{}", r.f0_ghz),
            format!("{}", r.kappa_mhz),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
