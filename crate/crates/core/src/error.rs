use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left {left:?}, right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward requires a 1x1 loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("non-finite gradient for parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("tweet is empty after cleaning: {text:?}")]
    EmptyAfterCleaning { text: String },
    #[error("length mismatch: {left} records vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("unknown emotion label {0:?}")]
    UnknownLabel(String),
    #[error("unknown sentiment {0:?}")]
    UnknownSentiment(String),

    #[error("tweets in one group carry different labels ({first} and {other})")]
    MixedLabels { first: String, other: String },
    #[error("cannot build a network from an empty tweet group")]
    EmptyGroup,
    #[error("malformed network: {0}")]
    MalformedGraph(String),

    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("class {class} has {count} networks; at least 2 are needed to split")]
    TooFewSamples { class: String, count: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("pair baseline expects group size 2, network {index} has {size}")]
    BadGroupSize { index: usize, size: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NonFiniteGradient { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
