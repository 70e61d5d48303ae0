use thiserror::Error;

#[derive(Debug, Error)]
pub enum CohError {
    #[error("invalid spin quantum number j = {0}: 2j must be a positive integer")]
    InvalidSpin(f64),

    #[error("matrix is not Hermitian (max |A - A†| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid population vector: {0}")]
    InvalidPopulations(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CohError>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CohError::DimensionMismatch { expected, found })
    }
}
