use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate transform: raw output of sample {sample} is the zero vector")]
    DegenerateTransform { sample: usize },

    #[error("support vector {index} is not unit-norm (norm = {norm})")]
    NotNormalized { index: usize, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("episode has no held-out samples")]
    MissingHeldout,

    #[error("decomposition identity violated: |lhs - rhs| = {residual:e}")]
    IdentityViolation { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
