use std::path::PathBuf;

use thiserror::Error;

/// Problems turning a CSV column into a rate sequence.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("column {0:?} not found in header")]
    ColumnNotFound(String),

    #[error("line {line}: column has only {width} fields")]
    MissingField { line: u64, width: usize },

    #[error("line {line}: {value:?} is not a number")]
    NonNumeric { line: u64, value: String },

    #[error("line {line}: value {value} must be positive to normalize by the minimum")]
    NonPositive { line: u64, value: f64 },

    #[error("line {line}: value {value} scales to {scaled}, above the bound {m_bound}")]
    OutOfRange {
        line: u64,
        value: f64,
        scaled: f64,
        m_bound: f64,
    },

    #[error("no data rows")]
    Empty,

    #[error(transparent)]
    Core(#[from] oneway_core::Error),
}
