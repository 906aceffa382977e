use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("unexpected CSV header: {0}")]
    BadHeader(String),

    #[error("corpus mixes datasets: expected `{expected}`, found `{found}`")]
    MixedDataset { expected: String, found: String },

    #[error("user `{0}` has fewer than 2 swipes")]
    UserTooSmall(String),

    #[error("swipe `{0}` has zero total duration")]
    DegenerateSwipe(String),

    #[error("percentile of an empty series")]
    EmptySeries,

    #[error("only one class present")]
    SingleClass,

    #[error("fold {0} is missing a class")]
    SingleClassFold(usize),

    #[error("minority class has {count} samples, need at least {needed}")]
    MinorityTooSmall { count: usize, needed: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("no impostor data in dataset `{0}`")]
    NoImpostorData(String),

    #[error("population pool is empty")]
    EmptyPool,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty decision list")]
    EmptyList,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("group `{0}` has fewer than 2 models")]
    GroupTooSmall(String),

    #[error("user `{user}` has {windows} genuine training windows, need at least {needed}")]
    InsufficientGenuineData {
        user: String,
        windows: usize,
        needed: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
