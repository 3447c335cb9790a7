//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by trace synthesis, the objective, the solver and the
/// initializers.
#[derive(Debug, Error)]
pub enum FrogError {
    #[error("pulse length {n} is too short (need at least 4 samples)")]
    PulseTooShort { n: usize },

    #[error("invalid delay stride L={stride} for N={n} (need 1 <= L < N)")]
    InvalidStride { stride: usize, n: usize },

    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },

    #[error("parameter out of range: {what}")]
    InvalidParameter { what: String },

    #[error("{what} must not be identically zero")]
    ZeroSignal { what: &'static str },

    #[error("smoothing parameter must be > 0 when computing gradients")]
    ZeroSmoothing,

    #[error("iterate became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("numeric failure: {what}")]
    Numeric { what: String },

    #[error("parse error at {path}:{line}: {what}")]
    Parse {
        path: String,
        line: usize,
        what: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FrogError> = std::result::Result<T, E>;
