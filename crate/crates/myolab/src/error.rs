//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter file content.
    #[error("configuration error: {0}")]
    Config(String),

    /// A model evaluation produced an invalid or non-finite result.
    #[error("model evaluation failed: {0}")]
    Model(String),

    /// An iterative solver did not converge.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Non-finite value encountered where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Eigenvalue computation failed its backward-error check.
    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    /// Input data shapes or ranges are inconsistent.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Filesystem or serialization failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of an iterative solver (as opposed to bad configuration).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::NonFinite(_) | Error::Model(_)
        )
    }
}
