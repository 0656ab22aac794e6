use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a structural invariant (arity, groundness, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// An operation was invoked outside its precondition.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// A dialogue move arrived that the episode protocol does not allow.
    #[error("conformance error: {0}")]
    Conformance(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }
}
