use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("representation mismatch between space elements")]
    RepresentationMismatch,

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("quadrature did not converge: achieved tolerance {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("growth bound (M={m}, a={a}) violated at t={t}: ||T(t)x|| = {observed:.6e} > {allowed:.6e}")]
    GrowthBoundViolation {
        m: f64,
        a: f64,
        t: f64,
        observed: f64,
        allowed: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scenario validation failed:\n{0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
