use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpwmask::cpw_analytics::line_properties;
use cpwmask::layout::{ChipConfig, Substrate};
use tempfile::TempDir;

fn cpwmask(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpwmask"))
        .current_dir(dir)
        .env_remove("CPWMASK_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = cpwmask(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn rows(path: PathBuf) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(&path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn col(rows: &[csv::StringRecord], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn generate_writes_the_chip_and_manifest() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["generate"]);
    let out = tmp.path().join("out");
    let mut files: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        ["chip.gds", "chip.svg", "manifest.toml", "wirebonds.csv"]
    );
    let manifest: toml::Table = std::fs::read_to_string(out.join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let summary = manifest["summary"].as_table().unwrap();
    assert_eq!(summary["resonators"].as_integer(), Some(8));
    assert_eq!(summary["chip_width_mm"].as_float(), Some(7.5));
    assert_eq!(summary["chip_height_mm"].as_float(), Some(7.5));
    assert_eq!(
        manifest["version"].as_str(),
        Some(env!("CARGO_PKG_VERSION"))
    );
    // the resolved config is echoed and parses back as a run config
    let echoed = toml::to_string(&manifest["config"]).unwrap();
    assert!(cpwmask::config::RunConfig::from_toml(&echoed).is_ok());
}

#[test]
fn infeasible_resonator_is_named() {
    let tmp = TempDir::new().unwrap();
    let out = cpwmask(
        tmp.path(),
        &[
            "generate",
            "--chip-resonator-f0-ghz",
            "9.0,5.0,5.4,5.8,6.2,6.6,7.0,7.4",
            "--chip-resonator-qc",
            "1e3,496e3,497e3,499e3,497e3,498e3,499e3,512e3",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r0"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    for d in ["a", "b"] {
        ok(tmp.path(), &["generate", "--output-dir", d]);
        ok(tmp.path(), &["analyze", "--output-dir", d]);
        ok(tmp.path(), &["sweep", "--output-dir", d]);
    }
    for f in [
        "chip.gds",
        "chip.svg",
        "wirebonds.csv",
        "manifest.toml",
        "analysis.csv",
        "synthetic_s21.csv",
        "sweep.csv",
    ] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        // manifests differ only in the echoed output dir
        if f == "manifest.toml" {
            let s = String::from_utf8(b)
                .unwrap()
                .replace("dir = \"b\"", "dir = \"a\"");
            assert_eq!(String::from_utf8(a).unwrap(), s);
        } else {
            assert!(a == b, "{f} differs");
        }
    }
}

#[test]
fn analyze_reproduces_the_reference_row() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["analyze"]);
    let r = rows(tmp.path().join("out/analysis.csv"));
    assert_eq!(r.len(), 8);
    assert_eq!(&r[0][0], "r0");
    let qc: f64 = r[0][4].parse().unwrap();
    let kappa: f64 = r[0][5].parse().unwrap();
    assert!((qc - 495e3).abs() / 495e3 < 1e-9, "{qc}");
    // 4600 MHz / 495000
    assert!((kappa - 4600.0 / 495e3).abs() < 1e-9, "{kappa}");
    assert!((kappa - 0.0093).abs() < 5e-5);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Decay rate (MHz)") && text.contains("r7"));
    assert!(tmp.path().join("out/analysis.txt").exists());
}

#[test]
fn empty_resonator_list_gives_a_header_only_table() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "analyze",
            "--chip-resonator-f0-ghz",
            "",
            "--chip-resonator-qc",
            "",
        ],
    );
    let text = std::fs::read_to_string(tmp.path().join("out/analysis.csv")).unwrap();
    assert_eq!(
        text.trim_end(),
        "label,f0_MHz,length_mm,Z0_ohm,Qc,kappa_MHz,crosstalk_ratio"
    );
}

#[test]
fn sapphire_impedance_stays_near_silicon() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["analyze", "--output-dir", "si"]);
    ok(
        tmp.path(),
        &[
            "analyze",
            "--output-dir",
            "sa",
            "--chip-substrate",
            "sapphire",
        ],
    );
    let si = col(&rows(tmp.path().join("si/analysis.csv")), 3)[0];
    let sa = col(&rows(tmp.path().join("sa/analysis.csv")), 3)[0];
    let cfg = ChipConfig {
        substrate: Substrate::Sapphire,
        ..ChipConfig::default()
    };
    let expected = line_properties(&cfg.cpw()).unwrap().impedance_z0;
    assert!((sa - expected).abs() < 1e-9);
    // same geometry, so only the quasi-static eps_eff = (eps_r + 1) / 2 changes
    let ratio = ((11.45_f64 + 1.0) / (10.06 + 1.0)).sqrt();
    assert!(
        (sa / si - ratio).abs() < 1e-12,
        "silicon {si}, sapphire {sa}"
    );
    assert!((sa - si).abs() < 3.0);
}

#[test]
fn sweep_covers_decades_and_follows_the_square_law() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["sweep"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("slope"));
    let r = rows(tmp.path().join("out/sweep.csv"));
    let qc = col(&r, 2);
    let span =
        qc.iter().cloned().fold(f64::MIN, f64::max) / qc.iter().cloned().fold(f64::MAX, f64::min);
    assert!(span.log10() >= 3.0, "{span}");
    assert!(tmp.path().join("out/sweep.dat").exists());

    ok(
        tmp.path(),
        &[
            "sweep",
            "--output-dir",
            "one",
            "--sweep-points",
            "1",
            "--sweep-min-length-um",
            "100",
            "--sweep-max-length-um",
            "100",
        ],
    );
    ok(
        tmp.path(),
        &[
            "sweep",
            "--output-dir",
            "two",
            "--sweep-points",
            "1",
            "--sweep-min-length-um",
            "200",
            "--sweep-max-length-um",
            "200",
        ],
    );
    let one = rows(tmp.path().join("one/sweep.csv"));
    let two = rows(tmp.path().join("two/sweep.csv"));
    assert_eq!(one.len(), 8);
    for (a, b) in col(&one, 2).iter().zip(col(&two, 2)) {
        assert!((a / b - 4.0).abs() < 1e-9, "{a} {b}");
    }
}

#[test]
fn bare_metal_has_no_interface_participation() {
    let tmp = TempDir::new().unwrap();
    let out = ok(
        tmp.path(),
        &[
            "participation",
            "--participation-refinement",
            "0",
            "--participation-ms-thickness-nm",
            "0",
            "--participation-sa-thickness-nm",
            "0",
            "--participation-ma-thickness-nm",
            "0",
            "--participation-field-maps",
            "csv,vtk",
        ],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("p_MS") && stdout.contains("C (fF/um)"));
    let report: toml::Table = std::fs::read_to_string(tmp.path().join("out/participation.toml"))
        .unwrap()
        .parse()
        .unwrap();
    for k in ["p_ms", "p_sa", "p_ma"] {
        assert_eq!(report[k].as_float(), Some(0.0), "{k}");
    }
    assert!(tmp.path().join("out/field.csv").exists());
    assert!(tmp.path().join("out/field.vtk").exists());
}

#[test]
fn ladder_deltas_shrink() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "participation",
            "--participation-ladder",
            "true",
            "--participation-field-maps",
            "",
        ],
    );
    let r = rows(tmp.path().join("out/participation_ladder.csv"));
    assert_eq!(r.len(), 3);
    let delta: Vec<f64> = r[1..].iter().map(|x| x[8].parse().unwrap()).collect();
    assert!(delta[1] < delta[0], "{delta:?}");
    let report: toml::Table = std::fs::read_to_string(tmp.path().join("out/participation.toml"))
        .unwrap()
        .parse()
        .unwrap();
    for k in [
        "p_ms",
        "p_sa",
        "p_ma",
        "p_substrate",
        "p_vacuum",
        "capacitance_ff_per_um",
    ] {
        assert!(report[k].as_float().is_some(), "{k}");
    }
}

#[test]
fn synthetic_chip_trace_gives_eight_fits() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["analyze"]);
    ok(tmp.path(), &["fit", "out/synthetic_s21.csv"]);
    let designed = rows(tmp.path().join("out/analysis.csv"));
    let fits = rows(tmp.path().join("out/fits.csv"));
    assert_eq!(fits.len(), 8);
    for k in 0..8 {
        assert!(tmp
            .path()
            .join(format!("out/fit_synthetic_s21_{k}.toml"))
            .exists());
    }
    for (d, f) in col(&designed, 1).iter().zip(col(&fits, 2)) {
        assert!((d / 1e3 - f).abs() < 1e-5, "{d} {f}");
    }
}

#[test]
fn noiseless_single_dip_inverts_exactly() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "analyze",
            "--chip-resonator-f0-ghz",
            "5.0",
            "--chip-resonator-qc",
            "3e5",
            "--analysis-synthetic-noise-std",
            "0",
            "--analysis-synthetic-q-internal",
            "4e5",
        ],
    );
    ok(tmp.path(), &["fit", "out/synthetic_s21.csv"]);
    let designed = rows(tmp.path().join("out/analysis.csv"));
    let fits = rows(tmp.path().join("out/fits.csv"));
    assert_eq!(fits.len(), 1);
    let qc = col(&designed, 4)[0];
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(col(&fits, 2)[0], 5.0) < 1e-4);
    assert!(rel(col(&fits, 3)[0], 4e5) < 1e-4);
    assert!(rel(col(&fits, 5)[0], qc) < 1e-4);
}

#[test]
fn flat_trace_exits_with_no_resonance() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("freq_GHz,re,im\n");
    for k in 0..200 {
        text.push_str(&format!("{},1,0\n", 5.0 + k as f64 * 1e-4));
    }
    std::fs::write(tmp.path().join("flat.csv"), text).unwrap();
    let out = cpwmask(tmp.path(), &["fit", "flat.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no resonance"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[chip]\ntrace_widht_um = 10\n").unwrap();
    let out = cpwmask(tmp.path(), &["generate", "-c", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace_widht_um"));
    let out = cpwmask(
        tmp.path(),
        &["generate", "--participation-refinement", "two"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn precedence_is_flag_then_env_then_file() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        "[output]\ndir = \"from_file\"\n",
    )
    .unwrap();
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cpwmask"));
        c.current_dir(tmp.path()).env_remove("CPWMASK_OUT");
        if let Some(e) = env {
            c.env("CPWMASK_OUT", e);
        }
        let mut args = vec!["sweep", "-c", "run.toml", "--sweep-points", "1"];
        args.extend_from_slice(extra);
        assert!(c.args(&args).status().unwrap().success());
    };
    run(None, &[]);
    assert!(tmp.path().join("from_file/sweep.csv").exists());
    run(Some("from_env"), &[]);
    assert!(tmp.path().join("from_env/sweep.csv").exists());
    run(Some("from_env2"), &["--output-dir", "from_flag"]);
    assert!(tmp.path().join("from_flag/sweep.csv").exists());
    assert!(!tmp.path().join("from_env2").exists());
}

#[test]
fn help_lists_every_config_key() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    let defaults = toml::Table::try_from(cpwmask::config::RunConfig::default()).unwrap();
    for (section, v) in &defaults {
        let keys: Vec<String> = match v.as_table() {
            Some(t) => t.keys().map(|k| format!("--{section}-{k}")).collect(),
            None => vec![format!("--{section}")],
        };
        for k in keys {
            let flag = k.replace('_', "-");
            assert!(
                help.contains(&format!("{flag} ")),
                "{flag} missing from --help"
            );
        }
    }
}
