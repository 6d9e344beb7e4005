use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("non-finite input data: {0}")]
    NonFinite(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
