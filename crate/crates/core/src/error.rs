use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid index set {indices:?} for dimension {n}")]
    BadIndex { indices: Vec<usize>, n: usize },

    #[error("matrix is not orthogonal: max |QᵀQ - I| = {residual:e}")]
    NotOrthogonal { residual: f64 },

    #[error("expected a rotation (det = +1), got det = {det}")]
    NotSpecial { det: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("tensor is not stationary diagonal (max |d| = {residual:e})")]
    NotStationaryDiagonal { residual: f64 },

    #[error("tensor is not Jacobi diagonal: {reason}")]
    NotJacobiDiagonal { reason: String },

    #[error("inconsistent class verdicts: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
