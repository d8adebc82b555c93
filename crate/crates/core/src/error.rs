//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (left {left}, right {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("subspace dimension {requested} too large: at most min(n-1, D) = {max} is feasible")]
    DimensionTooLarge { requested: usize, max: usize },

    #[error("degenerate data: requested {requested} components but covariance rank is {rank}")]
    DegenerateData { requested: usize, rank: usize },

    #[error("matrix contains non-finite entries")]
    NonFiniteData,

    #[error("empty matrix: need at least one row and one column")]
    EmptyMatrix,

    #[error("training data contains a single class; need at least two")]
    SingleClassData,

    #[error("binary labels must be +1 or -1, found {found}")]
    NonBinaryLabels { found: f64 },

    #[error("too few samples: {context} needs at least {needed}, got {got}")]
    TooFewSamples {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("class {class} has only {count} samples; two-fold split needs at least 2")]
    ClassTooSmall { class: usize, count: usize },

    #[error("no feasible grid cell: every subspace dimension was clipped out")]
    EmptyFeasibleGrid,

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("ragged rows: line {line} has {got} fields, expected {expected}")]
    RaggedRows {
        line: usize,
        got: usize,
        expected: usize,
    },

    #[error("non-integer label at line {line}: {value}")]
    NonIntegerLabel { line: usize, value: String },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
