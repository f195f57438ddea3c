use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file or record did not parse under its schema.
    #[error("parse error in {origin} (line {line}): {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    /// Parsed data breaks a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown lexicon word: {0:?}")]
    UnknownWord(String),

    /// A record is missing a label required by the declared schema, or
    /// carries a value the schema forbids.
    #[error("schema violation in record {id:?}: {message}")]
    Schema { id: String, message: String },

    /// A statistic is undefined for the given input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("span {start}..{end} of tweet {tweet_id:?} has no assigned connotation")]
    UnassignedSpan {
        tweet_id: String,
        start: usize,
        end: usize,
    },

    /// Some required items (tweets, embeddings, predictions) are not covered.
    #[error("coverage error: {what}: {}", .missing.join(", "))]
    Coverage { what: String, missing: Vec<String> },

    #[error("training error: {0}")]
    Training(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.to_string(),
        }
    }

    /// True for errors that stem from bad data rather than bad configuration
    /// or the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io { .. })
    }
}
