//! Damped least-squares fit of the notch model in the complex plane.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::NotchModelParams;
use super::trace::S21Trace;
use super::FitError;

/// Fewest samples a fit accepts.
pub const MIN_FIT_POINTS: usize = 16;

/// Internal parameters: f0, Q_l, |Q̂c|, φ, a, α at the reference frequency, τ.
///
/// The background phase is referenced to the trace centre `f_ref` so that
/// phase and delay are not nearly collinear over narrow spans.
pub type Theta = [f64; 7];

/// Model value and analytic partial derivatives with respect to [`Theta`].
pub fn internal_model(theta: &Theta, f_ref: f64, f: f64) -> (Complex64, [Complex64; 7]) {
    let [f0, ql, qc, phi, a, alpha, tau] = *theta;
    let i = Complex64::i();
    let x = (f - f0) / f0;
    let d = Complex64::new(1.0, 2.0 * ql * x);
    let rot = Complex64::from_polar(1.0, phi);
    let l = rot * (ql / qc) / d;
    let b = Complex64::from_polar(a, alpha - 2.0 * PI * (f - f_ref) * tau);
    let s = b * (1.0 - l);
    let d_f0 = -b * l * (2.0 * i * ql * f / (f0 * f0)) / d;
    let d_ql = -b * rot / (qc * d * d);
    let d_qc = b * l / qc;
    let d_phi = -b * i * l;
    let d_a = s / a;
    let d_alpha = i * s;
    let d_tau = -2.0 * PI * i * (f - f_ref) * s;
    (s, [d_f0, d_ql, d_qc, d_phi, d_a, d_alpha, d_tau])
}

fn to_theta(p: &NotchModelParams, f_ref: f64) -> Theta {
    [
        p.f0_ghz,
        p.q_loaded(),
        p.q_coupling_modulus(),
        p.impedance_mismatch_phi,
        p.background_amplitude,
        p.background_phase - 2.0 * PI * f_ref * p.cable_delay_ns,
        p.cable_delay_ns,
    ]
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn from_theta(t: &Theta, f_ref: f64) -> Option<NotchModelParams> {
    let [f0, ql, qc, phi, a, alpha, tau] = *t;
    let q_coupling = qc / phi.cos();
    let inv_qi = 1.0 / ql - 1.0 / q_coupling;
    let p = NotchModelParams {
        f0_ghz: f0,
        q_internal: 1.0 / inv_qi,
        q_coupling,
        impedance_mismatch_phi: phi,
        background_amplitude: a,
        background_phase: wrap(alpha + 2.0 * PI * f_ref * tau),
        cable_delay_ns: tau,
    };
    p.validate().ok().map(|_| p)
}

fn admissible(t: &Theta) -> bool {
    t.iter().all(|v| v.is_finite())
        && t[0] > 0.0
        && t[1] > 0.0
        && t[2] > 0.0
        && t[3].abs() < PI / 2.0
        && t[4] > 0.0
}

fn residuals(trace: &S21Trace, t: &Theta, f_ref: f64) -> DVector<f64> {
    let n = trace.len();
    let mut r = DVector::zeros(2 * n);
    for k in 0..n {
        let (s, _) = internal_model(t, f_ref, trace.frequencies_ghz[k]);
        let e = s - trace.s21[k];
        r[2 * k] = e.re;
        r[2 * k + 1] = e.im;
    }
    r
}

fn jacobian(trace: &S21Trace, t: &Theta, f_ref: f64) -> DMatrix<f64> {
    let n = trace.len();
    let mut j = DMatrix::zeros(2 * n, 7);
    for k in 0..n {
        let (_, d) = internal_model(t, f_ref, trace.frequencies_ghz[k]);
        for (c, v) in d.iter().enumerate() {
            j[(2 * k, c)] = v.re;
            j[(2 * k + 1, c)] = v.im;
        }
    }
    j
}

/// Noise per quadrature from successive differences, robust to a few outliers.
pub fn noise_estimate(values: &[Complex64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    d.sort_by(f64::total_cmp);
    // |Δz| is Rayleigh with scale σ√2; its median is 2σ√(ln 2)
    d[d.len() / 2] / (2.0 * std::f64::consts::LN_2.sqrt())
}

fn mean(v: impl Iterator<Item = Complex64>) -> Complex64 {
    let (s, n) = v.fold((Complex64::new(0.0, 0.0), 0usize), |(s, n), z| {
        (s + z, n + 1)
    });
    s / n.max(1) as f64
}

/// Deterministic starting point from the trace alone.
pub fn initial_guess(trace: &S21Trace) -> Result<NotchModelParams, FitError> {
    let n = trace.len();
    if n < MIN_FIT_POINTS {
        return Err(FitError::InvalidTrace(format!(
            "{n} points, need at least {MIN_FIT_POINTS}"
        )));
    }
    let f = &trace.frequencies_ghz;
    let f_ref = 0.5 * (f[0] + f[n - 1]);
    let edge = (n / 10).max(2);
    let sides = [0..edge, n - edge..n];

    // delay: common phase slope over both edges, separate offsets
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for r in sides.clone() {
        let mut ph: Vec<f64> = Vec::with_capacity(edge);
        for k in r.clone() {
            let p = trace.s21[k].arg();
            let p = match ph.last() {
                Some(&prev) => prev + wrap(p - prev),
                None => p,
            };
            ph.push(p);
        }
        let fm = r.clone().map(|k| f[k]).sum::<f64>() / edge as f64;
        let pm = ph.iter().sum::<f64>() / edge as f64;
        for (k, p) in r.zip(&ph) {
            sxx += (f[k] - fm) * (f[k] - fm);
            sxy += (f[k] - fm) * (p - pm);
        }
    }
    let tau = if sxx > 0.0 {
        -sxy / sxx / (2.0 * PI)
    } else {
        0.0
    };
    let undelay =
        |k: usize| trace.s21[k] * Complex64::from_polar(1.0, 2.0 * PI * (f[k] - f_ref) * tau);

    let base = mean(sides.iter().flat_map(|r| r.clone()).map(undelay));
    if base.norm() == 0.0 {
        return Err(FitError::NoResonance {
            depth: 0.0,
            noise: 0.0,
        });
    }
    let z: Vec<Complex64> = (0..n).map(|k| undelay(k) / base).collect();
    let noise = noise_estimate(&z);
    let smooth: Vec<Complex64> = (0..n)
        .map(|k| mean((k.saturating_sub(2)..(k + 3).min(n)).map(|m| z[m])))
        .collect();
    let depth_s = smooth.iter().map(|v| (1.0 - v).norm()).fold(0.0, f64::max);
    if !(depth_s >= 3.0 * noise && depth_s > 1e-9) {
        return Err(FitError::NoResonance {
            depth: depth_s,
            noise,
        });
    }
    let dip: Vec<f64> = z.iter().map(|v| (1.0 - v).norm_sqr()).collect();
    let kmax = (0..n).max_by(|&a, &b| dip[a].total_cmp(&dip[b])).unwrap();
    let f0 = f[kmax];
    let depth = dip[kmax].sqrt();
    let phi = (1.0 - z[kmax]).arg().clamp(-1.2, 1.2);

    // |1 − z|² is Lorentzian in detuning: half height at ±f0/(2 Q_l)
    let half = 0.5 * dip[kmax];
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = kmax;
        for k in range {
            if dip[k] <= half {
                let t = (dip[prev] - half) / (dip[prev] - dip[k]);
                return Some(f[prev] + t * (f[k] - f[prev]));
            }
            prev = k;
        }
        None
    };
    let lo = cross(&mut (0..kmax).rev());
    let hi = cross(&mut (kmax + 1..n));
    let width = match (lo, hi) {
        (Some(l), Some(h)) => h - l,
        (Some(l), None) => 2.0 * (f0 - l),
        (None, Some(h)) => 2.0 * (h - f0),
        (None, None) => return Err(FitError::InvalidTrace("dip is wider than the trace".into())),
    };
    let ql = f0 / width.max(f[1] - f[0]);
    let qc_mod = ql / depth;
    let q_coupling = qc_mod / phi.cos();
    let inv_qi = (1.0 / ql - 1.0 / q_coupling).max(0.01 / ql);
    Ok(NotchModelParams {
        f0_ghz: f0,
        q_internal: 1.0 / inv_qi,
        q_coupling: 1.0 / (1.0 / ql - inv_qi),
        impedance_mismatch_phi: phi,
        background_amplitude: base.norm(),
        background_phase: wrap(base.arg() + 2.0 * PI * f_ref * tau),
        cable_delay_ns: tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
        }
    }
}

/// Estimates, one-sigma uncertainties and diagnostics of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: NotchModelParams,
    pub sigma: NotchModelParams,
    pub q_loaded: f64,
    /// Order: f0, Q_i, Q_c, φ, a, α, τ.
    pub covariance: Vec<Vec<f64>>,
    /// Residuals (re, im interleaved) divided by the noise estimate.
    pub residuals: Vec<f64>,
    /// Residual standard deviation per quadrature.
    pub noise_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial: NotchModelParams,
}

impl FitResult {
    pub fn report_toml(&self, source: &str) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            source: &'a str,
            status: &'static str,
            iterations: usize,
            noise_estimate: f64,
            q_loaded: f64,
            params: &'a NotchModelParams,
            sigma: &'a NotchModelParams,
        }
        toml::to_string(&Report {
            source,
            status: if self.converged {
                "converged"
            } else {
                "not-converged"
            },
            iterations: self.iterations,
            noise_estimate: self.noise_estimate,
            q_loaded: self.q_loaded,
            params: &self.params,
            sigma: &self.sigma,
        })
        .expect("report serializes")
    }
}

/// Fits the notch model to `trace`, from `guess` or the automatic recipe.
pub fn fit_notch(
    trace: &S21Trace,
    guess: Option<&NotchModelParams>,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    let n = trace.len();
    if n < MIN_FIT_POINTS {
        return Err(FitError::InvalidTrace(format!(
            "{n} points, need at least {MIN_FIT_POINTS}"
        )));
    }
    let initial = match guess {
        Some(g) => {
            g.validate()?;
            *g
        }
        None => initial_guess(trace)?,
    };
    let f = &trace.frequencies_ghz;
    let f_ref = 0.5 * (f[0] + f[n - 1]);
    let mut theta = to_theta(&initial, f_ref);
    let mut r = residuals(trace, &theta, f_ref);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut it = 0;
    let floor = 1e-28 * n as f64;
    while it < opts.max_iterations && !converged {
        it += 1;
        let j = jacobian(trace, &theta, f_ref);
        let scale: Vec<f64> = (0..7).map(|c| j.column(c).norm().max(1e-300)).collect();
        let js = DMatrix::from_fn(2 * n, 7, |a, b| j[(a, b)] / scale[b]);
        let jtj = js.transpose() * &js;
        let g = js.transpose() * &r;
        loop {
            let mut m = jtj.clone();
            for k in 0..7 {
                m[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let step = match m.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => match m.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e20 {
                            break;
                        }
                        continue;
                    }
                },
            };
            let mut trial = theta;
            for k in 0..7 {
                trial[k] += step[k] / scale[k];
            }
            if admissible(&trial) {
                let rt = residuals(trace, &trial, f_ref);
                let ct = rt.norm_squared();
                if ct < cost || ct == 0.0 {
                    let predicted = (&js * &step).norm();
                    let small_step = predicted <= 1e-9 * rt.norm().max(1e-300);
                    let small_gain = cost - ct <= 1e-13 * cost;
                    theta = trial;
                    r = rt;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    converged = small_step || small_gain || cost <= floor;
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent direction left: at a minimum to working precision
                converged = true;
                break;
            }
        }
    }
    let last = from_theta(&theta, f_ref);
    if !converged {
        return Err(FitError::NotConverged {
            iterations: it,
            last,
        });
    }
    let params = last.ok_or(FitError::NotConverged {
        iterations: it,
        last: None,
    })?;

    let dof = (2 * n).saturating_sub(7).max(1) as f64;
    let s2 = cost / dof;
    let j = jacobian(trace, &theta, f_ref);
    let scale: Vec<f64> = (0..7).map(|c| j.column(c).norm().max(1e-300)).collect();
    let js = DMatrix::from_fn(2 * n, 7, |a, b| j[(a, b)] / scale[b]);
    let inv = (js.transpose() * &js)
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(7, 7, f64::NAN));
    let cov_t = DMatrix::from_fn(7, 7, |a, b| s2 * inv[(a, b)] / (scale[a] * scale[b]));

    // Jacobian of (f0, Qi, Qc, φ, a, α, τ) with respect to θ
    let [_, ql, qc, phi, _, _, _] = theta;
    let qi = params.q_internal;
    let mut gm = DMatrix::<f64>::zeros(7, 7);
    gm[(0, 0)] = 1.0;
    gm[(1, 1)] = qi * qi / (ql * ql);
    gm[(1, 2)] = -qi * qi * phi.cos() / (qc * qc);
    gm[(1, 3)] = -qi * qi * phi.sin() / qc;
    gm[(2, 2)] = 1.0 / phi.cos();
    gm[(2, 3)] = qc * phi.sin() / (phi.cos() * phi.cos());
    gm[(3, 3)] = 1.0;
    gm[(4, 4)] = 1.0;
    gm[(5, 5)] = 1.0;
    gm[(5, 6)] = 2.0 * PI * f_ref;
    gm[(6, 6)] = 1.0;
    let cov = &gm * cov_t * gm.transpose();
    let sd = |k: usize| cov[(k, k)].max(0.0).sqrt();
    let sigma = NotchModelParams {
        f0_ghz: sd(0),
        q_internal: sd(1),
        q_coupling: sd(2),
        impedance_mismatch_phi: sd(3),
        background_amplitude: sd(4),
        background_phase: sd(5),
        cable_delay_ns: sd(6),
    };
    let noise = s2.sqrt();
    let norm = if noise > 0.0 { noise } else { 1.0 };
    Ok(FitResult {
        q_loaded: params.q_loaded(),
        params,
        sigma,
        covariance: (0..7)
            .map(|a| (0..7).map(|b| cov[(a, b)]).collect())
            .collect(),
        residuals: r.iter().map(|v| v / norm).collect(),
        noise_estimate: noise,
        iterations: it,
        converged,
        initial,
    })
}

/// One dip located by [`detect_dips`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub f_ghz: f64,
    /// 1 − |S21|/baseline at the minimum.
    pub depth: f64,
    /// Full width at half power-dip depth, GHz.
    pub width_ghz: f64,
    /// Shares its dip region with another minimum or has a non-Lorentzian shape.
    pub merged: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DipReport {
    pub dips: Vec<Dip>,
    pub warnings: Vec<String>,
    pub noise: f64,
}

fn running_median(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let mut w: Vec<f64> = v[k.saturating_sub(half)..(k + half + 1).min(n)].to_vec();
            let mid = w.len() / 2;
            *w.select_nth_unstable_by(mid, f64::total_cmp).1
        })
        .collect()
}

/// Finds resonance dips in a wide trace and flags unresolved neighbours.
///
/// The baseline is a running median of |S21| over a quarter of the trace
/// (101 to 1001 samples); a dip region is a run of
/// samples deeper than `max(3σ, 1e-4)`. A region holding more than one
/// prominent minimum, or whose power dip is not Lorentzian in shape (ratio
/// of widths at quarter and half depth off √3 by more than 15%), is
/// reported as merged.
pub fn detect_dips(trace: &S21Trace) -> DipReport {
    let n = trace.len();
    let f = &trace.frequencies_ghz;
    let mag: Vec<f64> = trace.s21.iter().map(|v| v.norm()).collect();
    let base = running_median(&mag, (n / 8).clamp(50, 500));
    let m: Vec<f64> = mag
        .iter()
        .zip(&base)
        .map(|(a, b)| if *b > 0.0 { a / b } else { 1.0 })
        .collect();
    let mut d: Vec<f64> = m.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    // |Δm| is half-normal with scale σ√2; its median is 0.6745·σ√2
    let noise = if d.is_empty() {
        0.0
    } else {
        d[d.len() / 2] / (0.674_489_75 * 2f64.sqrt())
    };
    let thr = (3.0 * noise).max(1e-4);
    let mut report = DipReport {
        noise,
        ..Default::default()
    };

    // (index, run) of every local minimum inside a significant run
    let mut minima: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    let mut runs = 0;
    while k < n {
        if 1.0 - m[k] <= thr {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && 1.0 - m[k] > thr {
            k += 1;
        }
        let run = start..k;
        // isolated noise excursions clear 3 sigma now and then, never 6
        if run.clone().map(|i| 1.0 - m[i]).fold(0.0, f64::max) <= (6.0 * noise).max(thr) {
            continue;
        }
        minima.extend(
            run.filter(|&i| (i == start || m[i] < m[i - 1]) && (i + 1 == k || m[i] <= m[i + 1]))
                .map(|i| (i, runs)),
        );
        runs += 1;
    }
    // Merge across runs too, so tail fragments cut off by noise rejoin
    // their parent dip.
    loop {
        let mut merged_any = false;
        for w in 0..minima.len().saturating_sub(1) {
            let (a, b) = (minima[w].0, minima[w + 1].0);
            let bump = m[a..=b].iter().cloned().fold(f64::MIN, f64::max);
            // two Lorentzians one linewidth apart leave a bump near a sixth
            // of their depth. Noise extremes over a few hundred samples
            // span about 7 sigma peak to trough.
            let shallow = m[a].max(m[b]);
            if bump - shallow <= (10.0 * noise).max(thr).max(0.05 * (1.0 - shallow)) {
                minima.remove(if m[a] <= m[b] { w + 1 } else { w });
                merged_any = true;
                break;
            }
        }
        if !merged_any {
            break;
        }
    }
    for (w, &(i, run)) in minima.iter().enumerate() {
        let crowded = minima
            .iter()
            .enumerate()
            .any(|(v, &(_, r))| v != w && r == run);
        let p = 1.0 - m[i] * m[i];
        let width_at = |level: f64| -> Option<f64> {
            let target = level * p;
            let dp = |j: usize| 1.0 - m[j] * m[j];
            let side = |dir: isize| -> Option<f64> {
                let mut prev = i;
                let mut j = i as isize + dir;
                while j >= 0 && (j as usize) < n {
                    let ju = j as usize;
                    if dp(ju) <= target {
                        let t = (dp(prev) - target) / (dp(prev) - dp(ju));
                        return Some(f[prev] + t * (f[ju] - f[prev]));
                    }
                    prev = ju;
                    j += dir;
                }
                None
            };
            Some(side(1)? - side(-1)?)
        };
        let half = width_at(0.5);
        let quarter = width_at(0.25);
        let shape_ok = match (half, quarter) {
            (Some(h), Some(q)) if h > 0.0 => ((q / h) / 3f64.sqrt() - 1.0).abs() <= 0.15,
            _ => false,
        };
        let merged = crowded || !shape_ok;
        if merged {
            report
                .warnings
                .push(format!("merged or distorted dip near {:.6} GHz", f[i]));
        }
        report.dips.push(Dip {
            f_ghz: f[i],
            depth: 1.0 - m[i],
            width_ghz: half.unwrap_or(f64::NAN),
            merged,
        });
    }
    report
}
