//! Error type shared by every module, with the exit-code mapping used by the CLI.

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// A sup or argmax left the evaluation horizon; `partial` is the best value seen.
    #[error("horizon exceeded at index {index} (partial value {partial})")]
    Horizon { index: usize, partial: f64 },
    #[error("exact resonance at k = {k:?}")]
    Resonance { k: Vec<i64> },
    #[error("operation budget exceeded: {0}")]
    Budget(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for budget/horizon/convergence trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Domain(_) | Error::Resonance { .. } => 2,
            Error::Unsupported(_) => 2,
            Error::Horizon { .. }
            | Error::Budget(_)
            | Error::NonConvergence(_)
            | Error::Numeric(_)
            | Error::Consistency(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
