//! Notch-type S21 synthesis, trace readers and least-squares extraction of
//! internal and coupling quality factors.

pub mod fit;
pub mod model;
pub mod trace;

use thiserror::Error;

pub use fit::{detect_dips, fit_notch, initial_guess, Dip, DipReport, FitOptions, FitResult};
pub use model::{linspace, multiplexed_synthesize, synthesize_s21, NotchModelParams};
pub use trace::{parse_csv_trace, parse_touchstone, read_trace, S21Trace};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("no resonance: dip depth {depth:.3e} is under three times the noise {noise:.3e}")]
    NoResonance { depth: f64, noise: f64 },
    #[error("fit did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        last: Option<NotchModelParams>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
