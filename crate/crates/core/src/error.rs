use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("non-finite value in tensor data")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing structure parameter: {0}")]
    MissingParameter(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("empty data set")]
    EmptyData,
}

pub type Result<T> = std::result::Result<T, Error>;
