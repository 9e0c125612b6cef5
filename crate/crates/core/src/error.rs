use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate detuning: the Kerr expansion needs delta != 0")]
    DegenerateDetuning,

    #[error("no Kerr bistability: nonlinear coefficient K = {0} is not positive")]
    NoBistability(f64),

    #[error("polynomial root finding failed: {0}")]
    RootFinding(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("integration exceeded {steps} steps before t = {t}")]
    TooManySteps { steps: usize, t: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("analysis window too short: {0}")]
    WindowTooShort(String),

    #[error("unknown preset `{name}` (valid: {valid})")]
    UnknownPreset { name: String, valid: String },

    #[error("inconsistent configuration: {0}")]
    InconsistentConfig(String),

    #[error("config {path}:{line}: {reason}")]
    ConfigParse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json encoding: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RootFinding(_)
                | Error::StepSizeUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::TooManySteps { .. }
                | Error::FitFailure(_)
                | Error::NoBistability(_)
                | Error::DegenerateDetuning
                | Error::WindowTooShort(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
