use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Not enough phase transitions to form a complete ordered+disordered cycle.
    #[error("insufficient data: {reason} ({transitions} raw transitions)")]
    InsufficientData { reason: String, transitions: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn insufficient(reason: impl Into<String>, transitions: usize) -> Self {
        Error::InsufficientData {
            reason: reason.into(),
            transitions,
        }
    }
}
