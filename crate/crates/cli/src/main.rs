//! `cpwmask`: generate, analyze and characterize a CPW resonator test chip
//! from one closed-schema TOML config.
//!
//! Every config key is also a flag, `--<section>-<key>` (underscores become
//! dashes, top-level keys drop the section). Precedence: flag, then the
//! `CPWMASK_OUT` environment variable (output directory only), then the
//! config file, then built-in defaults.

mod commands;
mod flags;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};
use cpwmask::config::RunConfig;

/// Process exit statuses.
pub mod exit {
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DESIGN_RULE: u8 = 3;
    pub const SOLVER: u8 = 4;
}

/// A failed command: exit status plus a human-readable diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::IO, e.to_string())
    }
}

pub const OUT_ENV: &str = "CPWMASK_OUT";

fn cli(flags: &[flags::Flag]) -> Command {
    let mut root = Command::new("cpwmask")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Parametric CPW resonator mask generation and analysis")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("TOML run configuration; unknown keys are rejected"),
        )
        .subcommand(
            Command::new("generate")
                .about("Write chip.gds, chip.svg, wirebonds.csv and manifest.toml"),
        )
        .subcommand(
            Command::new("analyze")
                .about("Per-resonator table: f0, length, Z0, Qc, decay rate, crosstalk"),
        )
        .subcommand(Command::new("sweep").about("Qc against coupler length for every resonator"))
        .subcommand(
            Command::new("participation")
                .about("Cross-section solve: surface participation and capacitance"),
        )
        .subcommand(
            Command::new("fit")
                .about("Detect and fit every resonance in measured S21 traces")
                .arg(
                    Arg::new("traces")
                        .value_name("TRACE")
                        .required(true)
                        .action(ArgAction::Append)
                        .value_parser(clap::value_parser!(PathBuf))
                        .help("Touchstone .s2p or CSV (freq_GHz,re,im) files"),
                ),
        );
    for f in flags {
        root = root.arg(
            Arg::new(f.id.clone())
                .long(f.long.clone())
                .global(true)
                .value_name(f.value_name())
                .help(f.help())
                .help_heading("Config overrides"),
        );
    }
    root
}

fn resolve(m: &clap::ArgMatches, flags: &[flags::Flag]) -> Result<RunConfig, Failure> {
    let base = match m.get_one::<PathBuf>("config") {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text)
                .map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let mut table =
        toml::Table::try_from(&base).map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    if let Ok(dir) = std::env::var(OUT_ENV) {
        if !dir.is_empty() {
            flags::set(&mut table, &["output", "dir"], toml::Value::String(dir));
        }
    }
    for f in flags {
        if let Some(raw) = m.get_one::<String>(&f.id) {
            let v = f
                .parse(raw)
                .map_err(|e| Failure::new(exit::CONFIG, format!("--{}: {e}", f.long)))?;
            flags::set(&mut table, &f.path(), v);
        }
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::new(exit::CONFIG, e.to_string()))?;
    cfg.validate()
        .map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    Ok(cfg)
}

fn run() -> Result<(), Failure> {
    let flags = flags::from_defaults(&RunConfig::default());
    let matches = cli(&flags).get_matches();
    let cfg = resolve(&matches, &flags)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    match matches.subcommand() {
        Some(("generate", _)) => commands::generate(&cfg),
        Some(("analyze", _)) => commands::analyze(&cfg),
        Some(("sweep", _)) => commands::sweep(&cfg),
        Some(("participation", _)) => commands::participation(&cfg),
        Some(("fit", sub)) => {
            let traces: Vec<PathBuf> = sub
                .get_many::<PathBuf>("traces")
                .into_iter()
                .flatten()
                .cloned()
                .collect();
            commands::fit(&cfg, &traces)
        }
        _ => unreachable!("subcommand is required"),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
