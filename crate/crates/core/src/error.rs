use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or invalid inputs to an operation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure failed (eigensolver non-convergence,
    /// residual check failure, step-count overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Degenerate least-squares design.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
