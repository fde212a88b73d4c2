use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("all {n_traj} trajectories diverged")]
    AllDiverged { n_traj: usize },

    #[error("hessian is not positive definite (smallest eigenvalue of symmetric part: {min_eigenvalue})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("curvature estimate is not positive: {0}")]
    NonPositiveCurvature(f64),

    #[error("objective has no known minimizer")]
    NoKnownMinimizer,

    #[error("objective is not a one-dimensional quadratic")]
    NotQuadratic,

    #[error("negative variance bound {value} at step {step}")]
    NegativeVariance { step: usize, value: f64 },

    #[error("empty bracket at step {step}, component {index}: lower {lower} > upper {upper}")]
    EmptyBracket {
        step: usize,
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("matrix is not Schur stable (spectral radius {0})")]
    Unstable(f64),

    #[error("linear solve failed: {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
