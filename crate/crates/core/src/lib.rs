//! Table structure recognition toolkit.
//!
//! The non-neural core of a cell-based table recognizer: the structural data
//! model (boxes, spans, adjacency matrices, neighbor relations), ground-truth
//! unification, the cell alignment loss with analytic gradients, span
//! recovery from predicted adjacency matrices, the full evaluation protocol
//! (relation F1, TEDS, BLEU), a deterministic synthetic-table generator, and
//! file formats plus a CLI tying it together.

pub mod cli;
pub mod error;
pub mod eval;
pub mod gt;
pub mod io;
pub mod loss;
pub mod markup;
pub mod model;
pub mod rng;
pub mod structure;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use model::{
    validate_table, AdjacencyMatrices, BBox, BinaryMatrix, CellBox, CellId, Direction, Relation,
    RelationSet, SpanIndices, TableAnnotation, Violation,
};
