use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cpwmask::config::RunConfig;
use cpwmask::coupling::{
    crosstalk_estimate, decay_rate, log_log_slope, log_space, sweep_coupler_lengths,
    write_sweep_csv,
};
use cpwmask::cpw_analytics::line_properties;
use cpwmask::fitting::{
    self, detect_dips, fit_notch, multiplexed_synthesize, FitOptions, NotchModelParams,
};
use cpwmask::layout::{self, build_chip, LayoutError};
use cpwmask::participation::export::{write_field, FieldFormat};
use cpwmask::participation::{self, ParticipationError};

use crate::{exit, Failure};

fn layout_failure(e: LayoutError) -> Failure {
    match e {
        LayoutError::Io(e) => e.into(),
        other => Failure::new(exit::DESIGN_RULE, other.to_string()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::new(exit::IO, e.to_string())
}

pub fn generate(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let art = layout::generate(&cfg.chip, &cfg.wirebonds).map_err(layout_failure)?;
    write_file(dir, "chip.gds", &art.gds)?;
    write_file(dir, "chip.svg", art.svg.as_bytes())?;
    art.wirebonds
        .write_csv(create(dir, "wirebonds.csv")?)
        .map_err(layout_failure)?;

    let mut summary = toml::Table::new();
    let d = &art.design;
    summary.insert("resonators".into(), (d.resonators.len() as i64).into());
    summary.insert("chip_width_mm".into(), (d.width / 1e3).into());
    summary.insert("chip_height_mm".into(), (d.height / 1e3).into());
    summary.insert(
        "polygons".into(),
        (art.rendered.polygons.len() as i64).into(),
    );
    summary.insert(
        "etch_area_um2".into(),
        ((art.rendered.total_area() * 1e3).round() / 1e3).into(),
    );
    summary.insert("drc_rule_um".into(), art.drc.rule_um.into());
    summary.insert(
        "drc_violations".into(),
        (art.drc.violations.len() as i64).into(),
    );
    summary.insert(
        "wirebonds".into(),
        (art.wirebonds.bonds.len() as i64).into(),
    );
    summary.insert("ground_connected".into(), art.ground.connected().into());
    let resonators: Vec<toml::Value> = d
        .resonators
        .iter()
        .map(|r| {
            let mut t = toml::Table::new();
            t.insert("label".into(), r.design.label.clone().into());
            t.insert("f0_ghz".into(), r.design.target_f0.into());
            t.insert("coupler_length_um".into(), r.design.coupler_length.into());
            t.insert(
                "centerline_length_um".into(),
                r.design.centerline_length().into(),
            );
            t.into()
        })
        .collect();
    let mut manifest = toml::Table::new();
    manifest.insert("tool".into(), "cpwmask".into());
    manifest.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert(
        "files".into(),
        vec!["chip.gds", "chip.svg", "wirebonds.csv"].into(),
    );
    manifest.insert("summary".into(), summary.into());
    manifest.insert("resonator".into(), resonators.into());
    manifest.insert(
        "config".into(),
        toml::Table::try_from(cfg)
            .expect("config serializes")
            .into(),
    );
    write_file(
        dir,
        "manifest.toml",
        toml::to_string(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;

    for w in &art.wirebonds.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} resonators, {} polygons, {} wirebonds, written to {}",
        d.name,
        d.resonators.len(),
        art.rendered.polygons.len(),
        art.wirebonds.bonds.len(),
        dir.display()
    );
    if !art.drc.passed() {
        let mut msg = format!(
            "{} design-rule violations at {} um",
            art.drc.violations.len(),
            art.drc.rule_um
        );
        for v in art.drc.violations.iter().take(10) {
            let _ = write!(
                msg,
                "\n  {:?} {:.3} um at ({:.3}, {:.3})",
                v.kind, v.measured, v.location.x, v.location.y
            );
        }
        return Err(Failure::new(exit::DESIGN_RULE, msg));
    }
    if !art.ground.connected() {
        return Err(Failure::new(
            exit::DESIGN_RULE,
            format!(
                "{} ground islands remain after wirebonding",
                art.ground.isolated.len()
            ),
        ));
    }
    Ok(())
}

struct AnalysisRow {
    label: String,
    f0_mhz: f64,
    length_mm: f64,
    z0: f64,
    qc: f64,
    kappa_mhz: f64,
    crosstalk: Option<f64>,
}

pub fn analyze(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let design = build_chip(&cfg.chip).map_err(layout_failure)?;
    let props =
        line_properties(&cfg.chip.cpw()).map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    let model = cfg.chip.coupler_model().map_err(layout_failure)?;
    let mut rows: Vec<AnalysisRow> = design
        .resonators
        .par_iter()
        .map(|r| -> Result<AnalysisRow, Failure> {
            let f0 = r.design.target_f0;
            let qc = model
                .qc(r.design.coupler_length, f0)
                .map_err(|e| Failure::new(exit::DESIGN_RULE, e.to_string()))?;
            Ok(AnalysisRow {
                label: r.design.label.clone(),
                f0_mhz: f0 * 1e3,
                length_mm: r.design.centerline_length() / 1e3,
                z0: props.impedance_z0,
                qc,
                kappa_mhz: decay_rate(f0 * 1e3, qc)
                    .map_err(|e| Failure::new(exit::DESIGN_RULE, e.to_string()))?,
                crosstalk: None,
            })
        })
        .collect::<Result<_, _>>()?;

    if cfg.analysis.crosstalk && rows.len() >= 2 {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| rows[a].f0_mhz.total_cmp(&rows[b].f0_mhz));
        let f: Vec<f64> = order.iter().map(|&i| rows[i].f0_mhz / 1e3).collect();
        let k: Vec<f64> = order.iter().map(|&i| rows[i].kappa_mhz).collect();
        let pairs =
            crosstalk_estimate(&f, &k).map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
        for p in pairs {
            for idx in [order[p.lower], order[p.upper]] {
                let c = &mut rows[idx].crosstalk;
                *c = Some(c.map_or(p.ratio, |v: f64| v.min(p.ratio)));
            }
        }
        for p in crosstalk_estimate(&f, &k)
            .into_iter()
            .flatten()
            .filter(|p| p.flagged)
        {
            eprintln!(
                "warning: {} and {} are {:.1} linewidths apart",
                rows[order[p.lower]].label, rows[order[p.upper]].label, p.ratio
            );
        }
    }

    let mut w = csv::Writer::from_writer(create(dir, "analysis.csv")?);
    w.write_record([
        "label",
        "f0_MHz",
        "length_mm",
        "Z0_ohm",
        "Qc",
        "kappa_MHz",
        "crosstalk_ratio",
    ])
    .map_err(csv_failure)?;
    for r in &rows {
        w.write_record([
            r.label.clone(),
            r.f0_mhz.to_string(),
            r.length_mm.to_string(),
            r.z0.to_string(),
            r.qc.to_string(),
            r.kappa_mhz.to_string(),
            r.crosstalk.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_failure)?;
    }
    w.flush()?;

    let mut text = format!(
        "{:<9} {:>10} {:>17} {:>10} {:>12} {:>8} {:>10}\n",
        "Resonator", "f0 (MHz)", "Decay rate (MHz)", "Qc", "Length (mm)", "Z0", "Spacing/k"
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<9} {:>10.1} {:>17.4} {:>10.0} {:>12.4} {:>8.2} {:>10}",
            r.label,
            r.f0_mhz,
            r.kappa_mhz,
            r.qc,
            r.length_mm,
            r.z0,
            r.crosstalk
                .map(|c| format!("{c:.0}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    print!("{text}");
    if cfg.analysis.text_table {
        write_file(dir, "analysis.txt", text.as_bytes())?;
    }

    if cfg.analysis.synthetic_trace && !rows.is_empty() {
        let chip: Vec<NotchModelParams> = rows
            .iter()
            .map(|r| {
                NotchModelParams::ideal(r.f0_mhz / 1e3, cfg.analysis.synthetic_q_internal, r.qc)
            })
            .collect();
        let lo = chip.iter().map(|p| p.f0_ghz).fold(f64::INFINITY, f64::min) - 0.1;
        let hi = chip
            .iter()
            .map(|p| p.f0_ghz)
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.1;
        let trace = multiplexed_synthesize(
            &chip,
            (lo, hi),
            cfg.analysis.synthetic_points,
            cfg.analysis.synthetic_noise_std,
            cfg.seed,
        )
        .map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
        trace
            .write_csv(create(dir, "synthetic_s21.csv")?)
            .map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let model = cfg.chip.coupler_model().map_err(layout_failure)?;
    let s = &cfg.sweep;
    let lengths = log_space(s.min_length_um, s.max_length_um, s.points);
    let resonators: Vec<(String, f64)> = cfg
        .chip
        .labels()
        .into_iter()
        .zip(cfg.chip.resonator_f0_ghz.iter().copied())
        .collect();
    let rows = sweep_coupler_lengths(&model, &resonators, &lengths)
        .map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    write_sweep_csv(create(dir, "sweep.csv")?, &rows)
        .map_err(|e| Failure::new(exit::IO, e.to_string()))?;

    // gnuplot-style blocks, one per resonator
    let mut dat = create(dir, "sweep.dat")?;
    for (label, f0) in &resonators {
        writeln!(dat, "# {label} f0 = {f0} GHz\n# coupler_length_um qc")?;
        let mine: Vec<_> = rows
            .iter()
            .filter(|r| &r.resonator_label == label)
            .collect();
        for r in &mine {
            writeln!(dat, "{} {}", r.coupler_length_um, r.qc)?;
        }
        writeln!(dat, "\n")?;
        if mine.len() >= 2 {
            let x: Vec<f64> = mine.iter().map(|r| r.coupler_length_um).collect();
            let y: Vec<f64> = mine.iter().map(|r| r.qc).collect();
            let (hi, lo) = (
                y.iter().cloned().fold(f64::MIN, f64::max),
                y.iter().cloned().fold(f64::MAX, f64::min),
            );
            println!(
                "{label}: Qc {lo:.3e} .. {hi:.3e} ({:.2} decades), log-log slope {:.4}",
                (hi / lo).log10(),
                log_log_slope(&x, &y)
            );
        }
    }
    dat.flush()?;
    println!(
        "{} rows written to {}",
        rows.len(),
        dir.join("sweep.csv").display()
    );
    Ok(())
}

fn solver_failure(e: ParticipationError) -> Failure {
    match e {
        ParticipationError::InvalidModel(m) => Failure::new(exit::CONFIG, m),
        ParticipationError::Io(e) => e.into(),
        ParticipationError::Solver { reason, residuals } => Failure::new(
            exit::SOLVER,
            format!(
                "{reason}; last residuals {:?}",
                &residuals[residuals.len().saturating_sub(5)..]
            ),
        ),
        other => Failure::new(exit::SOLVER, other.to_string()),
    }
}

pub fn participation(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let model = cfg.cross_section();
    let p = &cfg.participation;
    let run = participation::run(&model, p.refinement).map_err(solver_failure)?;
    let r = &run.report;
    write_file(dir, "participation.toml", r.to_toml().as_bytes())?;
    write_file(dir, "participation_table.txt", r.table().as_bytes())?;
    print!("{}", r.table());
    println!(
        "p_vacuum {:.4}, {} cells, estimated discretization error {:.2e}",
        r.p_vacuum, r.mesh_cells, r.estimated_discretization_error
    );
    for f in &p.field_maps {
        let name = match f {
            FieldFormat::Csv => "field.csv",
            FieldFormat::Vtk => "field.vtk",
        };
        let mut out = create(dir, name)?;
        write_field(&run.solution, *f, &mut out)?;
        out.flush()?;
    }
    if p.ladder {
        let mut all: Vec<&participation::ParticipationReport> = run.ladder.iter().collect();
        all.push(r);
        let mut w = csv::Writer::from_writer(create(dir, "participation_ladder.csv")?);
        w.write_record([
            "level",
            "cells",
            "p_MS",
            "p_SA",
            "p_MA",
            "p_substrate",
            "p_vacuum",
            "C_fF_per_um",
            "delta_p_MS",
        ])
        .map_err(csv_failure)?;
        println!(
            "{:>5} {:>10} {:>12} {:>12} {:>12}",
            "level", "cells", "p_MS", "C (fF/um)", "delta p_MS"
        );
        for (k, q) in all.iter().enumerate() {
            let delta = if k == 0 {
                f64::NAN
            } else {
                (q.p_ms - all[k - 1].p_ms).abs() / q.p_ms.abs().max(f64::MIN_POSITIVE)
            };
            let delta_s = if k == 0 {
                String::new()
            } else {
                delta.to_string()
            };
            w.write_record([
                q.level.to_string(),
                q.mesh_cells.to_string(),
                q.p_ms.to_string(),
                q.p_sa.to_string(),
                q.p_ma.to_string(),
                q.p_substrate.to_string(),
                q.p_vacuum.to_string(),
                q.capacitance_ff_per_um.to_string(),
                delta_s,
            ])
            .map_err(csv_failure)?;
            println!(
                "{:>5} {:>10} {:>12.5e} {:>12.5} {:>12.3e}",
                q.level, q.mesh_cells, q.p_ms, q.capacitance_ff_per_um, delta
            );
        }
        w.flush()?;
    }
    Ok(())
}

fn fit_failure(e: fitting::FitError) -> Failure {
    match e {
        fitting::FitError::Io(e) => e.into(),
        other => Failure::new(exit::SOLVER, other.to_string()),
    }
}

pub fn fit(cfg: &RunConfig, traces: &[PathBuf]) -> Result<(), Failure> {
    let dir = &cfg.output.dir;
    let opts = FitOptions {
        max_iterations: cfg.fit.max_iterations,
    };
    let mut summary = csv::Writer::from_writer(create(dir, "fits.csv")?);
    summary
        .write_record([
            "trace", "index", "f0_GHz", "Qi", "Qi_sigma", "Qc", "Qc_sigma", "phi_rad", "Ql",
            "merged",
        ])
        .map_err(csv_failure)?;
    for path in traces {
        let trace = fitting::read_trace(path)
            .map_err(|e| Failure::new(exit::SOLVER, format!("{}: {e}", path.display())))?;
        let found = detect_dips(&trace);
        for w in &found.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        if found.dips.is_empty() {
            return Err(Failure::new(
                exit::SOLVER,
                format!(
                    "{}: no resonance found (noise {:.3e})",
                    path.display(),
                    found.noise
                ),
            ));
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("trace")
            .to_string();
        let fits: Vec<_> = found
            .dips
            .par_iter()
            .map(|d| {
                let half = cfg.fit.window_linewidths
                    * if d.width_ghz.is_finite() {
                        d.width_ghz
                    } else {
                        0.0
                    };
                let sub = if half > 0.0 {
                    trace.window(d.f_ghz - half, d.f_ghz + half)
                } else {
                    trace.clone()
                };
                let sub = if sub.len() >= fitting::fit::MIN_FIT_POINTS {
                    sub
                } else {
                    trace.clone()
                };
                fit_notch(&sub, None, &opts)
            })
            .collect();
        for (k, (d, res)) in found.dips.iter().zip(fits).enumerate() {
            let res = res.map_err(fit_failure).map_err(|f| {
                Failure::new(
                    f.code,
                    format!(
                        "{}: dip {k} near {:.6} GHz: {}",
                        path.display(),
                        d.f_ghz,
                        f.message
                    ),
                )
            })?;
            let source = format!("{} dip {k}", path.display());
            write_file(
                dir,
                &format!("fit_{stem}_{k}.toml"),
                res.report_toml(&source).as_bytes(),
            )?;
            let p = &res.params;
            summary
                .write_record([
                    path.display().to_string(),
                    k.to_string(),
                    p.f0_ghz.to_string(),
                    p.q_internal.to_string(),
                    res.sigma.q_internal.to_string(),
                    p.q_coupling.to_string(),
                    res.sigma.q_coupling.to_string(),
                    p.impedance_mismatch_phi.to_string(),
                    res.q_loaded.to_string(),
                    d.merged.to_string(),
                ])
                .map_err(csv_failure)?;
            println!(
                "{stem}[{k}] f0 {:.6} GHz  Qi {:.4e} ± {:.2e}  Qc {:.4e} ± {:.2e}",
                p.f0_ghz, p.q_internal, res.sigma.q_internal, p.q_coupling, res.sigma.q_coupling
            );
        }
    }
    summary.flush()?;
    Ok(())
}
