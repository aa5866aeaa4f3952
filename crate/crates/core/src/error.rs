use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: field {field}: {message}")]
    Rttm {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("record {record}: key `{key}`: {message}")]
    Seglst {
        record: usize,
        key: String,
        message: String,
    },

    #[error("segment-list document: {0}")]
    SeglstDocument(String),

    #[error("line {line}: {message}")]
    Uem { line: usize, message: String },

    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("segment {index} has no transcript words")]
    MissingWords { index: usize },

    #[error("expected a single session, found {0:?}")]
    MultipleSessions(Vec<String>),

    #[error("collar must be a non-negative number, got {0}")]
    InvalidCollar(f64),

    #[error("no embedding for speaker `{0}`")]
    MissingEmbedding(String),

    #[error("window [{0}, {1}] spans no frames")]
    EmptyWindow(f64, f64),

    #[error("cannot pool an empty embedding list")]
    EmptyEmbeddings,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("{triplets} triplets but {labels} labels")]
    LengthMismatch { triplets: usize, labels: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pool has {available} distinct speakers, {requested} requested")]
    InsufficientSpeakers { available: usize, requested: usize },

    #[error("utterance pool is empty")]
    EmptyPool,

    #[error("shape mismatch: {0}")]
    Shape(String),
}
