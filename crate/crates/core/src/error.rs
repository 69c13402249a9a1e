use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the filtering toolkit.
#[derive(Debug, Error)]
pub enum FilterError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("no usable rows in {0}")]
    NoUsableRows(PathBuf),

    #[error("label column {column} out of range for {columns} columns")]
    LabelColumnOutOfRange { column: usize, columns: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("k = {k} out of range for {m} samples")]
    KOutOfRange { k: usize, m: usize },

    #[error("non-finite objective or gradient after {iterations} iterations")]
    NonFinite { iterations: usize },

    #[error("line search failed after {halvings} halvings")]
    LineSearchFailed { halvings: usize },

    #[error("solver failed at alpha = {alpha}: {source}")]
    Continuation {
        alpha: f64,
        #[source]
        source: Box<FilterError>,
    },

    #[error("iteration budget of {0} exhausted")]
    BudgetExhausted(usize),

    #[error("centroids did not collapse for lambda up to {0:e}")]
    NoCollapse(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("every lambda in the grid failed")]
    AllLambdasFailed,
}

pub type Result<T> = std::result::Result<T, FilterError>;
