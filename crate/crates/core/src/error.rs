use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (valid: {valid})")]
    Index { index: usize, valid: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid coefficient at ({x}, {y}): {reason}")]
    Coefficient { x: f64, y: f64, reason: String },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    LineSearch { iteration: usize, backtracks: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
