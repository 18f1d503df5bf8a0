use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: hi ({hi}) must exceed lo ({lo})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid frame sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("expected {expected} window permutations, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid jitter offset {offset} at position {position}")]
    InvalidOffset { position: usize, offset: i64 },

    #[error("invalid drop set: {0}")]
    InvalidDrop(String),

    #[error("sequence of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },

    #[error("dropping {n} of {len} frames would empty the sequence")]
    WouldEmpty { n: usize, len: usize },

    #[error("group has no parsed scores")]
    DegenerateGroup,

    #[error("group size {0} is below the minimum of 2")]
    GroupSize(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    Empty,

    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {min} frames, have {have}")]
    InsufficientFrames { have: usize, min: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("grouping error: {0}")]
    Grouping(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
