//! Error type shared by all modules.

/// Crate-wide error enum.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A loss or gradient became non-finite during optimization.
    #[error("non-finite {what} at iteration {iter}")]
    NonFinite { what: &'static str, iter: usize },
    /// Solver failure (stagnation, singular system, non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
