use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("numeric domain error: {0}")]
    Numeric(String),
    #[error("unsupported game structure: {0}")]
    Unsupported(String),
    #[error("event with {size} outcomes exceeds the inclusion-exclusion limit of {limit}")]
    Complexity { size: usize, limit: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
