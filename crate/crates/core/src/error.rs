use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed record at line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate id {id} at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("embedding dimension mismatch at line {line}: expected {expected}, got {got}")]
    DimensionMismatchAt { line: usize, expected: usize, got: usize },
    #[error("non-finite embedding component at line {line}")]
    NonFiniteEmbedding { line: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("document {0} has no embedding")]
    MissingEmbedding(String),
    #[error("document {0} has no gold label")]
    MissingGoldLabel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("requested {requested} items from a pool of {available}")]
    NotEnoughItems { requested: usize, available: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("label index {index} out of range for {classes} classes")]
    LabelOutOfRange { index: usize, classes: usize },
    #[error("unknown document id {0}")]
    UnknownId(String),
    #[error("document {0} is not in the pending batch")]
    NotPending(String),
    #[error("document {0} is already labeled")]
    AlreadyLabeled(String),
    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error("operation not allowed in phase {0}")]
    WrongPhase(&'static str),
    #[error("training diverged: non-finite loss")]
    Diverged,
    #[error("unsupported session file version {0}")]
    VersionMismatch(u64),
    #[error("corrupted session file: {0}")]
    Corrupted(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
