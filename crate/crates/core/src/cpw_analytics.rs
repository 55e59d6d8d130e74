//! Closed-form coplanar waveguide line models.
//!
//! The impedance model is the zero-thickness, infinitely thick substrate
//! conformal mapping: `eps_eff = (eps_r + 1) / 2` and
//! `Z0 = 30 pi / sqrt(eps_eff) * K(k') / K(k)` with `k = s / (s + 2 g)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Relative permittivity of silicon used throughout the default chip.
pub const SILICON_EPS_R: f64 = 11.45;
/// Scalar relative permittivity used for the sapphire preset.
pub const SAPPHIRE_EPS_R: f64 = 10.06;
/// Smallest feature size allowed on the mask, µm.
pub const DEFAULT_MIN_FEATURE_UM: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum CpwError {
    #[error("elliptic modulus {0} outside [0, 1)")]
    Modulus(f64),
    #[error("invalid CPW geometry: {0}")]
    Geometry(String),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

/// Complete elliptic integral of the first kind, `K(k)`, by the
/// arithmetic-geometric mean: `K(k) = pi / (2 AGM(1, sqrt(1 - k^2)))`.
pub fn elliptic_k(k: f64) -> Result<f64, CpwError> {
    if !(0.0..1.0).contains(&k) {
        return Err(CpwError::Modulus(k));
    }
    let mut a = 1.0_f64;
    let mut b = (1.0 - k * k).sqrt();
    // quadratic convergence; 8 rounds already reach machine precision for k < 1 - 1e-12
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Cross-section of a CPW line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpwGeometry {
    /// Center trace width, µm.
    pub trace_width_s: f64,
    /// Gap between trace and ground, µm.
    pub gap_width_g: f64,
    pub substrate_eps_r: f64,
    /// Film thickness, µm.
    pub metal_thickness: f64,
    /// Substrate trench depth in the gaps, nm.
    pub trench_depth: f64,
}

impl Default for CpwGeometry {
    fn default() -> Self {
        Self {
            trace_width_s: 6.0,
            gap_width_g: 3.0,
            substrate_eps_r: SILICON_EPS_R,
            metal_thickness: 0.1,
            trench_depth: 100.0,
        }
    }
}

impl CpwGeometry {
    pub fn new(s: f64, g: f64, eps_r: f64) -> Self {
        Self {
            trace_width_s: s,
            gap_width_g: g,
            substrate_eps_r: eps_r,
            ..Self::default()
        }
    }

    /// Checks the type invariants against a smallest allowed feature (µm).
    pub fn validate(&self, min_feature_um: f64) -> Result<(), CpwError> {
        let (s, g) = (self.trace_width_s, self.gap_width_g);
        if !(s > 0.0 && g > 0.0) {
            return Err(CpwError::Geometry(format!(
                "trace and gap widths must be positive (s={s}, g={g})"
            )));
        }
        if !(self.substrate_eps_r >= 1.0) {
            return Err(CpwError::Geometry(format!(
                "substrate permittivity {} below 1",
                self.substrate_eps_r
            )));
        }
        if s.min(g) < min_feature_um {
            return Err(CpwError::Geometry(format!(
                "min(s, g) = {} µm below smallest feature {} µm",
                s.min(g),
                min_feature_um
            )));
        }
        if self.metal_thickness < 0.0 || self.trench_depth < 0.0 {
            return Err(CpwError::Geometry(
                "metal thickness and trench depth must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Modulus `k = s / (s + 2g)` of the conformal map.
    pub fn modulus(&self) -> f64 {
        self.trace_width_s / (self.trace_width_s + 2.0 * self.gap_width_g)
    }
}

/// Per-length line parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineProperties {
    pub eps_eff: f64,
    /// Ohm.
    pub impedance_z0: f64,
    /// fF/µm.
    pub capacitance_per_length: f64,
    /// nH/mm.
    pub inductance_per_length: f64,
    /// m/s.
    pub phase_velocity: f64,
}

impl LineProperties {
    /// Lossless line with only an effective permittivity known; Z0 set to 50 Ω.
    pub fn from_eps_eff(eps_eff: f64) -> Self {
        Self::from_z0_eps(50.0, eps_eff)
    }

    fn from_z0_eps(z0: f64, eps_eff: f64) -> Self {
        let sq = eps_eff.sqrt();
        let c_si = sq / (C0 * z0); // F/m
        let l_si = z0 * sq / C0; // H/m
        Self {
            eps_eff,
            impedance_z0: z0,
            capacitance_per_length: c_si * 1e9,
            inductance_per_length: l_si * 1e6,
            phase_velocity: C0 / sq,
        }
    }

    /// C in F/m.
    pub fn capacitance_si(&self) -> f64 {
        self.capacitance_per_length * 1e-9
    }

    /// L in H/m.
    pub fn inductance_si(&self) -> f64 {
        self.inductance_per_length * 1e-6
    }
}

pub fn line_properties(geom: &CpwGeometry) -> Result<LineProperties, CpwError> {
    geom.validate(0.0)?;
    let eps_eff = 0.5 * (geom.substrate_eps_r + 1.0);
    let k = geom.modulus();
    let kp = (1.0 - k * k).sqrt();
    let z0 = 30.0 * PI / eps_eff.sqrt() * elliptic_k(kp)? / elliptic_k(k)?;
    Ok(LineProperties::from_z0_eps(z0, eps_eff))
}

/// Quarter-wave length in mm for a resonance at `f0_ghz`.
pub fn quarter_wave_length(f0_ghz: f64, props: &LineProperties) -> Result<f64, CpwError> {
    if !(f0_ghz > 0.0) {
        return Err(CpwError::NonPositive {
            what: "frequency",
            value: f0_ghz,
        });
    }
    Ok(C0 / (4.0 * f0_ghz * 1e9 * props.eps_eff.sqrt()) * 1e3)
}

/// Fundamental resonance in GHz of a quarter-wave section `length_mm` long.
pub fn resonant_frequency(length_mm: f64, props: &LineProperties) -> Result<f64, CpwError> {
    if !(length_mm > 0.0) {
        return Err(CpwError::NonPositive {
            what: "length",
            value: length_mm,
        });
    }
    Ok(C0 / (4.0 * length_mm * 1e-3 * props.eps_eff.sqrt()) * 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Maclaurin series K(k) = pi/2 * sum [(2n)! / (2^{2n} n!^2)]^2 k^{2n}.
    fn k_series(k: f64, terms: usize) -> f64 {
        let mut coef = 1.0_f64;
        let mut sum = 1.0;
        for n in 1..terms {
            let ratio = (2 * n - 1) as f64 / (2 * n) as f64;
            coef *= ratio;
            sum += coef * coef * k.powi(2 * n as i32);
        }
        PI / 2.0 * sum
    }

    #[test]
    fn elliptic_k_reference_values() {
        assert_eq!(elliptic_k(0.0).unwrap(), PI / 2.0);
        // values from the series oracle with 400 terms (converges for k = 0.5)
        let k05 = k_series(0.5, 400);
        assert!((k05 - 1.685_750_354_812_596).abs() < 1e-12);
        assert!((elliptic_k(0.5).unwrap() - k05).abs() < 1e-12 * k05);
        // K(1/sqrt 2) = Gamma(1/4)^2 / (4 sqrt(pi)), Gamma(1/4) = 3.625609908221908...
        let gamma_quarter = 3.625_609_908_221_908_f64;
        let lemniscate = gamma_quarter * gamma_quarter / (4.0 * PI.sqrt());
        assert!((elliptic_k(0.5_f64.sqrt()).unwrap() - lemniscate).abs() < 1e-12 * lemniscate);
        assert!((lemniscate - 1.854_074_7).abs() < 1e-7);
    }

    #[test]
    fn elliptic_k_rejects_unit_modulus() {
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
        assert!(elliptic_k(f64::NAN).is_err());
    }

    #[test]
    fn table_geometry_properties() {
        let g = CpwGeometry::new(6.0, 3.0, SILICON_EPS_R);
        let p = line_properties(&g).unwrap();
        assert!((p.eps_eff - 6.225).abs() < 1e-15);
        assert!((p.impedance_z0 - 48.3).abs() < 0.05, "{}", p.impedance_z0);
        assert!((p.impedance_z0 - 50.0).abs() / 50.0 < 0.05);
        assert!(
            (p.capacitance_per_length - 0.172).abs() < 0.002,
            "{}",
            p.capacitance_per_length
        );
        let z = (p.inductance_si() / p.capacitance_si()).sqrt();
        assert!((z / p.impedance_z0 - 1.0).abs() < 1e-9);
        let v = 1.0 / (p.inductance_si() * p.capacitance_si()).sqrt();
        assert!((v / p.phase_velocity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quarter_wave_examples() {
        let p = LineProperties::from_eps_eff(6.225);
        let l0 = quarter_wave_length(4.6, &p).unwrap();
        let l7 = quarter_wave_length(7.4, &p).unwrap();
        assert!((l0 - 6.53).abs() < 0.005, "{l0}");
        assert!((l7 - 4.06).abs() < 0.005, "{l7}");
        let vac = LineProperties::from_eps_eff(1.0);
        assert_eq!(
            quarter_wave_length(5.0, &vac).unwrap(),
            C0 / (4.0 * 5e9) * 1e3
        );
        assert!((resonant_frequency(l0, &p).unwrap() - 4.6).abs() < 1e-12);
        assert!(quarter_wave_length(0.0, &p).is_err());
        assert!(resonant_frequency(-1.0, &p).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(CpwGeometry::new(6.0, 2.0, 11.45).validate(3.0).is_err());
        assert!(CpwGeometry::new(6.0, 3.0, 0.5).validate(3.0).is_err());
        assert!(CpwGeometry::new(0.0, 3.0, 11.45).validate(0.0).is_err());
        assert!(CpwGeometry::default().validate(3.0).is_ok());
    }

    proptest! {
        #[test]
        fn elliptic_matches_series(k in 0.0..0.3_f64) {
            let a = elliptic_k(k).unwrap();
            let b = k_series(k, 50);
            prop_assert!((a - b).abs() < 1e-10 * b);
        }

        #[test]
        fn round_trip_length(f in 1.0..20.0_f64, eps in 1.0..12.0_f64) {
            let p = LineProperties::from_eps_eff(eps);
            let l = quarter_wave_length(f, &p).unwrap();
            let back = resonant_frequency(l, &p).unwrap();
            prop_assert!((back / f - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lc_self_consistent(s in 3.0..50.0_f64, g in 3.0..50.0_f64, eps in 1.0..13.0_f64) {
            let p = line_properties(&CpwGeometry::new(s, g, eps)).unwrap();
            let x = p.inductance_si() * p.capacitance_si() * C0 * C0 / p.eps_eff;
            prop_assert!((x - 1.0).abs() < 1e-9);
            prop_assert!(p.eps_eff >= 1.0 && p.eps_eff <= eps);
        }

        #[test]
        fn z0_monotone(s in 3.0..40.0_f64, g in 3.0..40.0_f64, eps in 1.0..12.0_f64) {
            let base = line_properties(&CpwGeometry::new(s, g, eps)).unwrap().impedance_z0;
            // wider trace at fixed gap raises k
            let wider = line_properties(&CpwGeometry::new(s * 1.1, g, eps)).unwrap().impedance_z0;
            let denser = line_properties(&CpwGeometry::new(s, g, eps + 0.5)).unwrap().impedance_z0;
            prop_assert!(wider < base);
            prop_assert!(denser < base);
        }
    }
}
