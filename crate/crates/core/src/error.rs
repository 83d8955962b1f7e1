use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or arguments.
    Config,
    /// Malformed, missing or unsuitable input data.
    Data,
    /// The numerics broke down (divergence, collapse, degenerate clusters).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no term survived vocabulary pruning (corpus too small or too homogeneous)")]
    EmptyVocabulary,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("too few points: {points} points for {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },

    #[error("fuzzification constant must be > 1, got {0}")]
    InvalidFuzzifier(f64),

    #[error("cluster {0} has zero total membership weight")]
    EmptyCluster(usize),

    #[error("input contains a non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("training loss became non-finite ({loss}) at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("requested rank {rank} exceeds min(rows, cols) = {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("decoded topic vectors are all zero after rectification: topics {0:?}")]
    DegenerateTopics(Vec<usize>),

    #[error("line {line}: expected {expected} fields, found {found}")]
    MalformedLine { line: usize, expected: usize, found: usize },

    #[error("embedding dimension {found} does not match expected {expected}")]
    DimMismatch { expected: usize, found: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("only {found} topic words have embeddings; at least 2 are needed")]
    TooFewKnownWords { found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidFuzzifier(_) | Error::RankTooLarge { .. } | Error::InvalidConfig(_) => ErrorKind::Config,
            Error::EmptyCluster(_) | Error::NonFiniteLoss { .. } | Error::DegenerateTopics(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
