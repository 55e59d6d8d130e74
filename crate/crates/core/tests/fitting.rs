use cpwmask::coupling::REFERENCE_RESONATORS;
use cpwmask::fitting::fit::{internal_model, Theta};
use cpwmask::fitting::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn span(p: &NotchModelParams, linewidths: f64, n: usize) -> Vec<f64> {
    let h = linewidths * p.linewidth_ghz();
    linspace(p.f0_ghz - h, p.f0_ghz + h, n)
}

fn dressed(f0: f64, qi: f64, qc: f64) -> NotchModelParams {
    NotchModelParams {
        impedance_mismatch_phi: 0.15,
        background_amplitude: 0.8,
        background_phase: 1.1,
        cable_delay_ns: 40.0,
        ..NotchModelParams::ideal(f0, qi, qc)
    }
}

#[test]
fn critical_coupling_halves_transmission() {
    let p = NotchModelParams::ideal(4.6, 495e3, 495e3);
    let s = p.s21(4.6);
    assert!((s - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    let far = p.s21(4.6 * (1.0 + 1.0));
    assert!((far.norm() - 1.0).abs() < 1e-5);
}

#[test]
fn power_dip_width_is_the_loaded_linewidth() {
    let p = NotchModelParams::ideal(4.6, 495e3, 495e3);
    let f = span(&p, 3.0, 60001);
    let pw: Vec<f64> = f.iter().map(|&x| p.s21(x).norm_sqr()).collect();
    let min = pw.iter().cloned().fold(f64::INFINITY, f64::min);
    let level = 0.5 * (1.0 + min);
    let inside: Vec<f64> = f
        .iter()
        .zip(&pw)
        .filter(|(_, &v)| v <= level)
        .map(|(&x, _)| x)
        .collect();
    let width = inside.last().unwrap() - inside.first().unwrap();
    let expected_mhz = 4600.0 / 247_500.0;
    assert!((width * 1e3 - expected_mhz).abs() < 2.0 * (f[1] - f[0]) * 1e3);
    assert!((expected_mhz - 0.0186).abs() < 1e-4);
}

#[test]
fn noiseless_round_trip_for_every_reference_row() {
    for r in &REFERENCE_RESONATORS {
        let truth = dressed(r.f0_mhz / 1e3, r.qc, r.qc);
        let trace = synthesize_s21(&truth, &span(&truth, 5.0, 801), 0.0, 0).unwrap();
        let fit = fit_notch(&trace, None, &FitOptions::default()).unwrap();
        let p = fit.params;
        let pairs = [
            (p.f0_ghz, truth.f0_ghz),
            (p.q_internal, truth.q_internal),
            (p.q_coupling, truth.q_coupling),
            (p.impedance_mismatch_phi, truth.impedance_mismatch_phi),
            (p.background_amplitude, truth.background_amplitude),
            (p.background_phase, truth.background_phase),
            (p.cable_delay_ns, truth.cable_delay_ns),
        ];
        for (k, (a, b)) in pairs.iter().enumerate() {
            assert!(rel(*a, *b) < 1e-4, "{} parameter {k}: {a} vs {b}", r.label);
        }
        assert!(fit.converged);
    }
}

#[test]
fn reported_loaded_q_is_consistent() {
    let truth = dressed(5.0, 3e5, 7e5);
    let trace = synthesize_s21(&truth, &span(&truth, 5.0, 401), 1e-3, 3).unwrap();
    let fit = fit_notch(&trace, None, &FitOptions::default()).unwrap();
    let p = fit.params;
    assert!(rel(1.0 / fit.q_loaded, 1.0 / p.q_internal + 1.0 / p.q_coupling) < 1e-14);
}

#[test]
fn median_error_under_noise_is_small() {
    let truth = NotchModelParams::ideal(5.0, 5e5, 5e5);
    let f = span(&truth, 5.0, 401);
    let mut errs: Vec<f64> = (0..100u64)
        .map(|seed| {
            let trace = synthesize_s21(&truth, &f, 1e-3, seed).unwrap();
            rel(
                fit_notch(&trace, None, &FitOptions::default())
                    .unwrap()
                    .params
                    .q_internal,
                5e5,
            )
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[49] + errs[50]);
    assert!(median < 0.01, "median {median}");
}

#[test]
fn flat_trace_has_no_resonance() {
    let p = NotchModelParams::ideal(5.0, 5e5, 5e5);
    let f = linspace(4.0, 4.001, 200);
    let flat = S21Trace::new(
        f.clone(),
        f.iter().map(|&x| p.background(x)).collect(),
        "flat",
    )
    .unwrap();
    assert!(matches!(
        fit_notch(&flat, None, &FitOptions::default()),
        Err(FitError::NoResonance { .. })
    ));
    let noisy = synthesize_s21(&NotchModelParams::ideal(4.5, 5e5, 5e5), &f, 1e-3, 1).unwrap();
    assert!(matches!(
        fit_notch(&noisy, None, &FitOptions::default()),
        Err(FitError::NoResonance { .. })
    ));
}

#[test]
fn analytic_jacobian_matches_central_differences() {
    let theta: Theta = [5.2, 2.1e5, 3.3e5, 0.3, 0.9, -0.7, 12.0];
    let f_ref = 5.2;
    for f in [5.2 - 2e-5, 5.2 + 7e-6, 5.2 + 3e-5] {
        let (_, d) = internal_model(&theta, f_ref, f);
        for k in 0..7 {
            // f0 moves the response on the scale of a linewidth (~2e-5 GHz)
            let h = if k == 0 { 1e-10 } else { 1e-6 * theta[k].abs() };
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd =
                (internal_model(&up, f_ref, f).0 - internal_model(&dn, f_ref, f).0) / (2.0 * h);
            assert!(
                (fd - d[k]).norm() <= 1e-6 * d[k].norm(),
                "parameter {k} at {f}: {fd} vs {}",
                d[k]
            );
        }
    }
}

#[test]
fn complex_gain_and_frequency_shift_are_absorbed() {
    let truth = dressed(6.2, 4e5, 5e5);
    let f = span(&truth, 5.0, 601);
    let trace = synthesize_s21(&truth, &f, 1e-4, 9).unwrap();
    let base = fit_notch(&trace, None, &FitOptions::default())
        .unwrap()
        .params;

    let k = Complex64::from_polar(2.5, -2.0);
    let gained =
        S21Trace::new(f.clone(), trace.s21.iter().map(|v| v * k).collect(), "gain").unwrap();
    let g = fit_notch(&gained, None, &FitOptions::default())
        .unwrap()
        .params;
    assert!(rel(g.q_internal, base.q_internal) < 1e-4);
    assert!(rel(g.background_amplitude, 2.5 * base.background_amplitude) < 1e-6);

    // a shifted axis keeps the linewidth in absolute frequency
    let shift = 1e-3;
    let moved = S21Trace::new(
        f.iter().map(|x| x + shift).collect(),
        trace.s21.clone(),
        "shift",
    )
    .unwrap();
    let m = fit_notch(&moved, None, &FitOptions::default())
        .unwrap()
        .params;
    assert!((m.f0_ghz - base.f0_ghz - shift).abs() < 1e-9);
    assert!(rel(m.f0_ghz / m.q_internal, base.f0_ghz / base.q_internal) < 1e-4);
}

#[test]
fn critical_coupling_minimizes_qi_uncertainty() {
    let qi = 5e5;
    let sigma_at = |ratio: f64| {
        let truth = NotchModelParams::ideal(5.0, qi, ratio * qi);
        let trace = synthesize_s21(&truth, &span(&truth, 5.0, 801), 1e-3, 11).unwrap();
        let fit = fit_notch(&trace, None, &FitOptions::default()).unwrap();
        fit.sigma.q_internal / qi
    };
    let (over, crit, under) = (sigma_at(0.1), sigma_at(1.0), sigma_at(10.0));
    assert!(over > crit && under > crit, "{over} {crit} {under}");
}

#[test]
fn eight_dips_on_the_reference_schedule() {
    let chip: Vec<NotchModelParams> = REFERENCE_RESONATORS
        .iter()
        .map(|r| NotchModelParams::ideal(r.f0_mhz / 1e3, r.qc, r.qc))
        .collect();
    let trace = multiplexed_synthesize(&chip, (4.4, 7.6), 2001, 0.0, 0).unwrap();
    let report = detect_dips(&trace);
    assert_eq!(report.dips.len(), 8, "{:?}", report.dips);
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    for (dip, p) in report.dips.iter().zip(&chip) {
        assert!((dip.f_ghz - p.f0_ghz).abs() <= p.linewidth_ghz());
    }
}

#[test]
fn noise_does_not_split_dips() {
    let chip: Vec<NotchModelParams> = REFERENCE_RESONATORS
        .iter()
        .map(|r| NotchModelParams::ideal(r.f0_mhz / 1e3, 5e5, r.qc))
        .collect();
    for seed in 0..5 {
        let trace = multiplexed_synthesize(&chip, (4.5, 7.5), 2001, 1e-4, seed).unwrap();
        let report = detect_dips(&trace);
        assert_eq!(report.dips.len(), 8, "seed {seed}: {:?}", report.dips);
        assert!(
            report.warnings.is_empty(),
            "seed {seed}: {:?}",
            report.warnings
        );
    }
}

#[test]
fn one_resonator_multiplex_equals_single_synthesis() {
    let p = dressed(5.0, 4e5, 4e5);
    let m = multiplexed_synthesize(&[p], (4.99, 5.01), 101, 0.0, 0).unwrap();
    let s = synthesize_s21(&p, &m.frequencies_ghz, 0.0, 0).unwrap();
    assert_eq!(m.s21, s.s21);
}

#[test]
fn neighbours_one_linewidth_apart_are_flagged() {
    let a = NotchModelParams::ideal(5.0, 5e5, 5e5);
    let b = NotchModelParams::ideal(5.0 + a.linewidth_ghz(), 5e5, 5e5);
    let trace = multiplexed_synthesize(&[a, b], (4.999, 5.001), 501, 0.0, 0).unwrap();
    let report = detect_dips(&trace);
    assert!(!report.warnings.is_empty());
    assert!(report.dips.iter().all(|d| d.merged));
}

#[test]
fn touchstone_formats() {
    let ri = "! minimal\n# GHz S RI R 50\n1.0 0 0 0.5 0.5 0 0 0 0\n2.0 0 0 0.1 -0.2 0 0 0 0\n3.0 0 0 1 0 0 0 0 0\n";
    let t = parse_touchstone(ri, "ri").unwrap();
    assert_eq!(t.frequencies_ghz, vec![1.0, 2.0, 3.0]);
    assert_eq!(t.s21[1], Complex64::new(0.1, -0.2));

    let db = "# MHZ S DB R 50\n4600 0 0 -6 90 0 0 0 0\n";
    let t = parse_touchstone(db, "db").unwrap();
    assert!((t.frequencies_ghz[0] - 4.6).abs() < 1e-12);
    let expect = Complex64::from_polar(10f64.powf(-6.0 / 20.0), std::f64::consts::FRAC_PI_2);
    assert!((t.s21[0] - expect).norm() < 1e-15);

    // no option line: GHz, magnitude-angle; a record may wrap
    let ma = "1.5 0 0\n 0.25 180\n 0 0 0 0\n";
    let t = parse_touchstone(ma, "ma").unwrap();
    assert!((t.s21[0] - Complex64::new(-0.25, 0.0)).norm() < 1e-15);
}

#[test]
fn malformed_inputs_name_the_line() {
    let bad = "# GHZ S RI R 50\n1 0 0 0 0 0 0 0 0\n2 0 0 x 0 0 0 0 0\n";
    assert!(matches!(
        parse_touchstone(bad, "t"),
        Err(FitError::Parse { line: 3, .. })
    ));
    let desc = "# GHZ S RI R 50\n2 0 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 0 0\n";
    assert!(matches!(
        parse_touchstone(desc, "t"),
        Err(FitError::Parse { line: 3, .. })
    ));
    let short = "1 0 0 0 0\n";
    assert!(matches!(
        parse_touchstone(short, "t"),
        Err(FitError::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_touchstone("# GHZ Y RI R 50\n", "t"),
        Err(FitError::Parse { line: 1, .. })
    ));

    let csv = "freq_GHz,re,im\n5.0,1,0\n4.9,1,0\n";
    assert!(matches!(
        parse_csv_trace(csv, "c"),
        Err(FitError::Parse { line: 3, .. })
    ));
    assert!(matches!(
        parse_csv_trace("f,re,im\n1,1,0\n", "c"),
        Err(FitError::Parse { line: 1, .. })
    ));
    let ok = parse_csv_trace("freq_GHz,re,im\n1,0.5,-0.5\n2,1,0\n", "c").unwrap();
    assert_eq!(ok.s21[0], Complex64::new(0.5, -0.5));
}

#[test]
fn csv_writer_feeds_the_reader() {
    let p = dressed(5.0, 4e5, 4e5);
    let t = synthesize_s21(&p, &span(&p, 3.0, 64), 1e-3, 2).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let back = parse_csv_trace(std::str::from_utf8(&buf).unwrap(), "rt").unwrap();
    assert_eq!(back.frequencies_ghz, t.frequencies_ghz);
    assert_eq!(back.s21, t.s21);
}

#[test]
fn fit_report_has_status_and_uncertainties() {
    let p = dressed(5.0, 4e5, 4e5);
    let t = synthesize_s21(&p, &span(&p, 5.0, 401), 1e-3, 5).unwrap();
    let fit = fit_notch(&t, None, &FitOptions::default()).unwrap();
    let doc: toml::Table = fit.report_toml("x").parse().unwrap();
    assert_eq!(doc["status"].as_str(), Some("converged"));
    assert!(doc["sigma"]["q_internal"].as_float().unwrap() > 0.0);
    assert!(fit.sigma.q_internal < 0.1 * fit.params.q_internal);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_noiseless_traces_invert(
        f0 in 4.0f64..8.0,
        qi in 1e4f64..2e6,
        ratio in 0.2f64..5.0,
        phi in -0.6f64..0.6,
        a in 0.05f64..3.0,
        alpha in -3.0f64..3.0,
        tau in -80.0f64..80.0,
    ) {
        let truth = NotchModelParams {
            f0_ghz: f0,
            q_internal: qi,
            q_coupling: qi * ratio,
            impedance_mismatch_phi: phi,
            background_amplitude: a,
            background_phase: alpha,
            cable_delay_ns: tau,
        };
        let trace = synthesize_s21(&truth, &span(&truth, 6.0, 401), 0.0, 0).unwrap();
        let fit = fit_notch(&trace, None, &FitOptions::default()).unwrap();
        prop_assert!(rel(fit.params.q_internal, qi) < 1e-4);
        prop_assert!(rel(fit.params.q_coupling, qi * ratio) < 1e-4);
        prop_assert!((fit.params.f0_ghz - f0).abs() < 1e-4 * truth.linewidth_ghz());
    }
}
