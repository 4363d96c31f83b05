use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh integrity: {0}")]
    MeshIntegrity(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
