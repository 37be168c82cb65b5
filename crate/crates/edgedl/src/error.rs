use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity that must be finite is infinite, e.g. an outage of 1.
    #[error("divergent: {0}")]
    Divergent(String),

    /// Local gradient descent produced a non-finite gradient.
    #[error("non-finite gradient at inner iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    /// Training diverged; the trace up to the failure is attached.
    #[error("training diverged at global iteration {iteration}: gap {gap:e}")]
    TrainingDiverged {
        iteration: usize,
        gap: f64,
        trace: Box<crate::cocoa::TrainTrace>,
    },

    /// A config file line could not be understood.
    #[error("{path}:{line}: {message}")]
    Config { path: String, line: usize, message: String },

    /// A dataset row could not be parsed.
    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Rejects values that are NaN, infinite or not strictly positive.
pub(crate) fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {x}")))
    }
}

/// Rejects values outside the open unit interval.
pub(crate) fn unit_open(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}
