use thiserror::Error;

pub type Result<T, E = IsaError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid scheduler at pc {pc}: {reason}")]
    InvalidScheduler { pc: usize, reason: String },
    #[error("invalid predictor: {0}")]
    InvalidPredictor(String),
    #[error("out of bounds: {0}")]
    Bounds(String),
}

impl IsaError {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        IsaError::Parse { line, col, msg: msg.into() }
    }
}
