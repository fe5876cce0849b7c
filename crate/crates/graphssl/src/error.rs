//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, numerics and the benchmark harness.
#[derive(Error, Debug)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An index vector was requested for a (near-)constant score vector.
    #[error("degenerate variance: input vector is constant")]
    DegenerateVariance,

    /// A linear system could not be solved to the required residual.
    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    /// An iterative routine hit its iteration cap without converging.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// Dataset or configuration files could not be read or written.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Dataset or configuration files could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
