use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("context is empty or whitespace-only")]
    EmptyContext,

    #[error("schema error in conversation {conversation}: {message}")]
    Schema { conversation: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("span ({start}, {end}) does not overlap any sentence")]
    Locate { start: usize, end: usize },

    #[error("index {index} out of range: {what}")]
    Index { index: usize, what: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dim { expected: usize, found: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("non-finite embedding value")]
    NonFinite,

    #[error("relevance cell ({row}, {col}): {source}")]
    Cell {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("selection requires at least one history turn")]
    EmptyHistory,

    #[error("prompt window has no sentences")]
    EmptyWindow,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("turn {turn} has no rationale span")]
    MissingRationale { turn: usize },

    #[error("service {service} unavailable: {reason}")]
    ServiceUnavailable { service: &'static str, reason: String },

    #[error("protocol error from {service}: {reason}")]
    Protocol { service: &'static str, reason: String },

    #[error("every context sentence has been used as a rationale")]
    Exhausted,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("conversation {conversation}, turn {turn}: {source}")]
    Turn {
        conversation: String,
        turn: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn index(index: usize, what: impl Into<String>) -> Self {
        Error::Index { index, what: what.into() }
    }

    /// Attaches conversation/turn context.
    pub fn at_turn(self, conversation: &str, turn: usize) -> Self {
        Error::Turn { conversation: conversation.to_owned(), turn, source: Box::new(self) }
    }

    /// Strips any `Turn`/`Cell` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Turn { source, .. } | Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }
}
