//! Shared error type for the toolkit.

use std::path::PathBuf;

use crate::model::CellId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation that requires span indices met a cell without them.
    #[error("cell {0} has no span indices")]
    MissingSpans(CellId),

    /// A table failed invariant validation; the message lists the violations.
    #[error("invalid table: {0}")]
    InvalidTable(String),

    /// No input items were supplied where at least one is required.
    #[error("empty input")]
    EmptyInput,

    /// A loss input was NaN or infinite.
    #[error("non-finite loss input")]
    NonFinite,

    /// Matrix dimension does not match the cell count.
    #[error("adjacency dimension {got} does not match cell count {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An adjacency matrix differs from its transpose.
    #[error("{matrix} adjacency matrix is not symmetric at ({i}, {j})")]
    NonSymmetric {
        matrix: &'static str,
        i: usize,
        j: usize,
    },

    /// Pair sampling needs at least two cells.
    #[error("pair sampling requires at least 2 cells, got {0}")]
    InsufficientCells(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// BLEU reference sequence has no tokens.
    #[error("empty reference sequence")]
    EmptyReference,

    /// TEDS was asked to score a tree with no nodes.
    #[error("empty tree")]
    EmptyTree,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `context` carries path/line/element information.
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    /// Parsed data violates a model invariant.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
