use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("size limit exceeded: {0}")]
    Limit(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
