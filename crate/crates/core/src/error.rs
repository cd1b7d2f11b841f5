use std::path::PathBuf;

use thiserror::Error;

pub type Result<V> = std::result::Result<V, GaitError>;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("empty input")]
    Empty,

    #[error("missing {0} streams")]
    MissingStreams(String),

    #[error("{what}: need at least {need} samples, got {got}")]
    TooShort {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("streams do not overlap in time")]
    EmptyOverlap,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no signal energy")]
    NoSignalEnergy,

    #[error("aperiodic signal")]
    Aperiodic,

    #[error("too few negative peaks ({0})")]
    TooFewPeaks(usize),

    #[error("no complete cycle")]
    NoCompleteCycle,

    #[error("non-finite feature at index {0}")]
    NonFiniteFeature(usize),

    #[error("zero variance")]
    ZeroVariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown subject '{0}'")]
    UnknownSubject(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("need at least 2 subjects, got {0}")]
    InsufficientSubjects(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GaitError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GaitError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, GaitError::InvalidConfig(_) | GaitError::Io { .. })
    }
}
