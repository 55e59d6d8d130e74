//! Notch-type transmission model and trace synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trace::S21Trace;
use super::FitError;

/// Parameters of one resonance seen through a feedline.
///
/// `q_coupling` is the effective coupling quality factor, `1 / Re(1/Q̂c)`,
/// so `1/Q_l = 1/Q_i + 1/Q_c` holds exactly; the modulus entering the
/// transmission formula is `|Q̂c| = q_coupling · cos φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchModelParams {
    pub f0_ghz: f64,
    pub q_internal: f64,
    pub q_coupling: f64,
    /// Impedance-mismatch rotation φ, rad.
    pub impedance_mismatch_phi: f64,
    pub background_amplitude: f64,
    /// rad
    pub background_phase: f64,
    pub cable_delay_ns: f64,
}

impl NotchModelParams {
    /// Ideal resonance: unit background, no delay, no mismatch.
    pub fn ideal(f0_ghz: f64, q_internal: f64, q_coupling: f64) -> Self {
        Self {
            f0_ghz,
            q_internal,
            q_coupling,
            impedance_mismatch_phi: 0.0,
            background_amplitude: 1.0,
            background_phase: 0.0,
            cable_delay_ns: 0.0,
        }
    }

    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_internal + 1.0 / self.q_coupling)
    }

    /// |Q̂c|, the coupling modulus in the transmission formula.
    pub fn q_coupling_modulus(&self) -> f64 {
        self.q_coupling * self.impedance_mismatch_phi.cos()
    }

    /// Full linewidth f0/Q_l, GHz.
    pub fn linewidth_ghz(&self) -> f64 {
        self.f0_ghz / self.q_loaded()
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let ok = self.f0_ghz > 0.0
            && self.q_internal > 0.0
            && self.q_coupling > 0.0
            && self.impedance_mismatch_phi.abs() < PI / 2.0
            && self.background_amplitude > 0.0
            && [self.background_phase, self.cable_delay_ns]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FitError::InvalidParams(format!("{self:?}")))
        }
    }

    /// Transmission at `f_ghz`.
    pub fn s21(&self, f_ghz: f64) -> Complex64 {
        self.background(f_ghz) * self.resonance(f_ghz)
    }

    /// `a·e^{iα}·e^{−2πifτ}`.
    pub fn background(&self, f_ghz: f64) -> Complex64 {
        Complex64::from_polar(
            self.background_amplitude,
            self.background_phase - 2.0 * PI * f_ghz * self.cable_delay_ns,
        )
    }

    /// The bracketed resonant factor alone.
    pub fn resonance(&self, f_ghz: f64) -> Complex64 {
        let ql = self.q_loaded();
        let x = (f_ghz - self.f0_ghz) / self.f0_ghz;
        let d = Complex64::new(1.0, 2.0 * ql * x);
        1.0 - Complex64::from_polar(ql / self.q_coupling_modulus(), self.impedance_mismatch_phi) / d
    }
}

/// Evenly spaced frequencies over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Adds complex Gaussian noise of `std` per quadrature, seeded.
pub fn add_noise(values: &mut [Complex64], std: f64, seed: u64) {
    if std <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, std).expect("finite std");
    for v in values {
        *v += Complex64::new(n.sample(&mut rng), n.sample(&mut rng));
    }
}

/// Model trace on `frequencies` with optional seeded noise.
pub fn synthesize_s21(
    params: &NotchModelParams,
    frequencies: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<S21Trace, FitError> {
    params.validate()?;
    let mut s: Vec<Complex64> = frequencies.iter().map(|&f| params.s21(f)).collect();
    add_noise(&mut s, noise_std, seed);
    S21Trace::new(
        frequencies.to_vec(),
        s,
        format!("synthetic f0={} GHz", params.f0_ghz),
    )
}

/// Half-width in linewidths of the dense window around each resonance.
pub const WINDOW_LINEWIDTHS: f64 = 10.0;

/// Frequency grid of `points` uniform samples over `band`, merged with a
/// dense window of `window_points` samples centred on each resonance.
/// Uniform sampling alone cannot resolve sub-MHz dips over a GHz band.
pub fn multiplexed_grid(
    chip: &[NotchModelParams],
    band: (f64, f64),
    points: usize,
    window_points: usize,
) -> Vec<f64> {
    let mut f = linspace(band.0, band.1, points);
    for p in chip {
        let half = WINDOW_LINEWIDTHS * p.linewidth_ghz();
        f.extend(
            linspace(p.f0_ghz - half, p.f0_ghz + half, window_points)
                .into_iter()
                .filter(|&v| v >= band.0 && v <= band.1),
        );
    }
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

/// Product of the resonant factors over the background of `chip[0]`.
pub fn multiplexed_synthesize(
    chip: &[NotchModelParams],
    band: (f64, f64),
    points: usize,
    noise_std: f64,
    seed: u64,
) -> Result<S21Trace, FitError> {
    let first = chip
        .first()
        .ok_or_else(|| FitError::InvalidParams("no resonators".into()))?;
    for p in chip {
        p.validate()?;
        if p.f0_ghz < band.0 || p.f0_ghz > band.1 {
            return Err(FitError::InvalidParams(format!(
                "{} GHz lies outside the band",
                p.f0_ghz
            )));
        }
    }
    let f = multiplexed_grid(chip, band, points, 401);
    let mut s: Vec<Complex64> = f
        .iter()
        .map(|&x| {
            chip.iter()
                .fold(first.background(x), |acc, p| acc * p.resonance(x))
        })
        .collect();
    add_noise(&mut s, noise_std, seed);
    S21Trace::new(f, s, format!("synthetic, {} resonators", chip.len()))
}
