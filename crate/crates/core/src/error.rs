use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("feature id {id} out of range for model dimension {dimension}")]
    Dimension { id: usize, dimension: usize },

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("no spanning arborescence exists under the given edge weights")]
    NoTree,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("method `{0}` is not supported for this structure")]
    UnsupportedMethod(String),

    #[error("all alternative weights are zero")]
    DegenerateWeights,

    #[error("average precision is undefined without at least one error")]
    NoErrors,

    #[error("confidence value {0} outside [0, 1]")]
    ConfidenceRange(f64),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
