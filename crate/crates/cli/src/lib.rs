//! Experiment driver behind the `mimfd` binary: config parsing, forward and
//! inverse runs, the table sweeps and the verification suites.

pub mod config;
pub mod presets;
pub mod run;
pub mod tables;
pub mod verify;

use std::path::PathBuf;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] mimfd::Error),
    #[error("line search failed after {iterations} iterations (outputs written)")]
    LineSearch { iterations: usize },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 config, 2 solver, 3 IO, 4 line search, 5 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                mimfd::Error::Io(_) | mimfd::Error::Parse { .. } => 3,
                mimfd::Error::LineSearch { .. } => 4,
                _ => 2,
            },
            CliError::LineSearch { .. } => 4,
            CliError::Verification(_) => 5,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
