use thiserror::Error;

use crate::linalg::CMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("integral did not converge: {0}")]
    Divergent(String),

    #[error("trace constraint violated: tr(Σ) = {trace}, expected {expected}")]
    ConstraintViolation { trace: f64, expected: f64 },

    #[error("generator must satisfy the unit-scale constraint E{{Q}} = N")]
    NotUnitScale,

    #[error("model contract violated: {0}")]
    Contract(String),

    #[error("SFIM has an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),

    #[error("fixed point did not converge after {iterations} iterations")]
    NotConverged { iterations: usize, last: Box<CMatrix> },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
