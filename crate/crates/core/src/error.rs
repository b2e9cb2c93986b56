//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input (bad dimensions, non-positive eps, ...).
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("composition error: {0}")]
    Composition(String),
    /// A stated precondition of a bound or construction does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A structure failed validation (face closure, vertex map, ...).
    #[error("validation failed: {0}")]
    Validation(String),
    /// The delta shell could not be certified against the requested budget.
    #[error("shell certification failed: {0}")]
    Shell(String),
    /// Degenerate geometry: flat simplices, vanishing acceptance rate.
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for certification failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shell(_) | Error::Geometry(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
