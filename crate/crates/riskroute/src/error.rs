use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bin width mismatch: {0} vs {1}")]
    BinWidthMismatch(f64, f64),

    #[error("no profile entry for edge {edge_id}")]
    MissingProfile { edge_id: u64 },

    #[error("parse error ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("referential integrity: {0}")]
    Referential(String),

    #[error("path enumeration aborted: more than {limit} simple paths")]
    EnumerationGuard { limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
