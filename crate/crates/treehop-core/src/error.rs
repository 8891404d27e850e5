use thiserror::Error;

/// Error type shared by the whole crate.
///
/// Variants are grouped by how callers are expected to react: configuration
/// and dimension errors are caller bugs, `Format`/`Parse` mean a bad input
/// file (and carry a byte offset or line number), `Numeric` means a
/// computation produced non-finite values and was aborted.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    InvalidDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate chunk id {0:?}")]
    DuplicateId(String),

    #[error("zero-norm embedding")]
    ZeroNorm,

    #[error("non-finite value in embedding")]
    NonFinite,

    #[error("store is empty")]
    EmptyStore,

    #[error("unknown chunk id {0:?}")]
    UnknownId(String),

    #[error("not enough negative candidates: need {need}, have {have}")]
    InsufficientCandidates { need: usize, have: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}: byte {offset}: {msg}")]
    Format { path: String, offset: u64, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    pub fn format(path: impl Into<String>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), offset, msg: msg.into() }
    }
}
