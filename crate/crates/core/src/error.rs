use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed model, out-of-range parameter, violated
    /// model assumption.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input that breaks an operation's precondition (unsorted sample,
    /// non-monotone sequence, ...).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Should not happen for valid inputs.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
