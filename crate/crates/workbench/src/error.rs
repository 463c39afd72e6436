use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Isa(#[from] rbisim_isa::IsaError),
    #[error(transparent)]
    Core(#[from] rbisim_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

pub(crate) fn config(msg: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Config(msg.into())
}
