//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("Riccati iteration found no stabilizing solution: {0}")]
    NotStabilizable(String),

    #[error("coefficient matrix has an eigenvalue with nonnegative real part")]
    UnstableF,

    #[error("pair is not detectable: {0}")]
    NotDetectable(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("rank and positive-definiteness routes disagree: {0}")]
    InconsistentChecks(String),

    #[error("simulation diverged at t = {t:.6}: {what}")]
    Diverged { t: f64, what: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
