use std::io;

use thiserror::Error;

use crate::matrix::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),

    #[error("row count {k} exceeds dimension {n}")]
    RowCountExceedsDimension { k: usize, n: usize },

    #[error("vector is empty")]
    EmptyVector,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid Rademacher sign {value} at index {index}")]
    InvalidSign { index: usize, value: f64 },

    #[error("invalid subset structure: {}", .0.first_failure().unwrap_or("unknown"))]
    InvalidStructure(Box<ValidationReport>),

    #[error("row index {index} out of range for {rows} rows")]
    RowIndexOutOfRange { index: usize, rows: usize },

    #[error("row indices must satisfy k1 < k2, got ({0}, {1})")]
    RowsNotDistinct(usize, usize),

    #[error("graph has {vertices} vertices, exceeding the exact-mode cap of {cap}")]
    GraphTooLargeForExact { vertices: usize, cap: usize },

    #[error("theta {0} outside the open interval (0, pi)")]
    ThetaOutOfRange(f64),

    #[error("invalid bound inputs: {0}")]
    InvalidBoundInputs(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quantizer {0} does not produce binary hashes")]
    NonBinaryQuantizer(String),

    #[error("row {row}: {source}")]
    Row { row: usize, source: Box<Error> },

    #[error("cannot normalize the zero vector")]
    ZeroVector,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
