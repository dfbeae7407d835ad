use thiserror::Error;

/// Which axis a permutation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Column,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Row => "row",
            Axis::Column => "column",
        })
    }
}

/// Errors from table construction, ingestion and inspection.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("row at line {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Utf8Error { offset: usize },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column {index} has an empty name")]
    EmptyColumnName { index: usize },
    #[error("duplicate column name `{0}` (after normalization)")]
    DuplicateColumn(String),
    #[error("{kind} permutation has length {got}, expected {expected}")]
    BadPermutation {
        kind: Axis,
        expected: usize,
        got: usize,
    },
    #[error("{kind} permutation is not a bijection")]
    NotAPermutation { kind: Axis },
    #[error("column `{column}` has {got} cells, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("cell in column `{column}` has type {found}, expected {expected}")]
    CellTypeMismatch {
        column: String,
        expected: String,
        found: String,
    },
    #[error("table has {cells} cells, above the limit of {limit}")]
    TooLarge { cells: usize, limit: usize },
}
