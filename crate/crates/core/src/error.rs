use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid code, architecture or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value passed to an operation violates its precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The request would not fit in memory (e.g. enumerating 2^K codewords).
    #[error("resource limit: {0}")]
    Resource(String),

    /// Non-finite loss or gradient during training.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// NVE is undefined when a MAP BER entry is zero.
    #[error("undefined ratio: MAP BER is zero at validation point {index}")]
    UndefinedRatio { index: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
