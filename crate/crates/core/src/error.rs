use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {grid} points is too small for band limit N={max_mode}: need at least {required} points to avoid aliasing")]
    GridTooSmall {
        grid: usize,
        max_mode: usize,
        required: usize,
    },

    #[error("expected {expected} coefficients for band limit N={max_mode}, got {actual}")]
    LengthMismatch {
        max_mode: usize,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("implicit stage equations did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step {step} does not divide t={t} into {requirement} steps")]
    StepDoesNotDivide {
        t: f64,
        step: f64,
        requirement: &'static str,
    },

    #[error("dimension {dimension} exceeds the cap of {cap} for dense computations")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
