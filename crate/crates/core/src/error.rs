use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty catalog")]
    EmptyCatalog,
    #[error("duplicate product id {0:?}")]
    DuplicateProduct(String),
    #[error("invalid path {0:?}")]
    InvalidPath(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("network: {0}")]
    Net(#[source] std::io::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot split degenerate timeline")]
    DegenerateTimeline,
    #[error("split fraction {0} leaves one side empty")]
    EmptySplit(f64),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty embedding file")]
    EmptyEmbeddings,
    #[error("inconsistent dimension: expected {expected}, got {got} (line {line})")]
    InconsistentDim { expected: usize, got: usize, line: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("empty validation set")]
    EmptyValidation,
    #[error("empty training set")]
    EmptyTraining,
    #[error("checkpoint vocabulary {found} does not match taxonomy {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("gini of an empty distribution")]
    EmptyDistribution,
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn shape(expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::Shape { expected: format!("{expected:?}"), got: format!("{got:?}") }
    }
}
