use thiserror::Error;

/// Errors raised across the training stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke a documented precondition (bad dimensions, out-of-range
    /// action, mismatched task id, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Invalid configuration value or unknown identifier.
    #[error("configuration error: {0}")]
    Config(String),
    /// A loss, state, or reward became NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Sampling was requested from an empty replay buffer.
    #[error("replay buffer is empty")]
    EmptyBuffer,
    /// Snapshot data could not be restored.
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
