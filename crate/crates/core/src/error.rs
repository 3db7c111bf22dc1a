use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid diffusion coefficient: {0}")]
    InvalidSigma(String),

    #[error("invalid lattice field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("region too small: {0}")]
    RegionTooSmall(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
