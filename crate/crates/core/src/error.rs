use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid base representation: {0}")]
    InvalidBase(String),
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("Clifford word index {index} out of range 0..{dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("operation not supported for this model: {0}")]
    Unsupported(String),
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error("matrix is not Hermitian (residual {residual:e}, tolerance {tolerance:e})")]
    NotHermitian { residual: f64, tolerance: f64 },
    #[error("function is not real-valued: {0}")]
    NotReal(String),
    #[error("malformed Fourier data: {0}")]
    MalformedFourier(String),
    #[error("insufficient padding: tail coefficient {tail:e} above tolerance {tolerance:e}")]
    InsufficientPadding { tail: f64, tolerance: f64 },
    #[error("spinor field vanishes identically")]
    ZeroField,
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("missing input for {kind}: {what}")]
    MissingInput { kind: String, what: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
