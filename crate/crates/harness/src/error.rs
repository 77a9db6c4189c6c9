use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] cpnest::Error),
    #[error(transparent)]
    Solver(#[from] cpnest::accel::ParseSolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed plan: {0}")]
    Plan(String),
    #[error("malformed trace {path}: {msg}")]
    Trace { path: PathBuf, msg: String },
    #[error("{0}")]
    Profile(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
