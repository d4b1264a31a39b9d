use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: expected {expected} rows, found {found}", file.display())]
    RowCount {
        file: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: {found} values is not a multiple of declared dim {dim}", file.display())]
    DimMismatch {
        file: PathBuf,
        dim: usize,
        found: usize,
    },

    #[error("{}: label {value} at row {row} outside [-1, 1]", file.display())]
    LabelRange {
        file: PathBuf,
        row: usize,
        value: f64,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("checkpoint corrupted: {0}")]
    Corruption(String),

    #[error("checkpoint task is {found}, expected {expected}")]
    TaskMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension { op, left, right }
    }
}
