use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error(
        "singular denominator{} (condition estimate {cond:.3e})",
        .z.map(|z| format!(" at z = {z}")).unwrap_or_default()
    )]
    SingularDenominator { z: Option<Complex64>, cond: f64 },

    #[error("empty basis: {0}")]
    EmptyBasis(String),

    #[error("not Hankel nonnegative definite extendable: {0}")]
    NotExtendable(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid tolerances: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
