use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZossError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss evaluation at direction {direction} (batch slot {slot})")]
    Numeric { slot: usize, direction: usize },

    #[error("trajectory diverged at step {t} (|w| = {norm:e})")]
    Diverged { t: usize, norm: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown loss model {0:?}")]
    UnknownModel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ZossError>;

impl From<std::io::Error> for ZossError {
    fn from(e: std::io::Error) -> Self {
        ZossError::Io(e.to_string())
    }
}

impl From<csv::Error> for ZossError {
    fn from(e: csv::Error) -> Self {
        ZossError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for ZossError {
    fn from(e: serde_json::Error) -> Self {
        ZossError::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> ZossError {
    ZossError::InvalidArgument(msg.into())
}
