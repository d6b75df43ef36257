//! Domain types shared by every module: boxes, cells, tables, adjacency
//! matrices and neighbor relations, plus invariant validation.
//!
//! All types are plain immutable values; nothing here does I/O. Invariants are
//! checked by [`validate_table`], which reports violations rather than
//! panicking, so imperfect model output can still be represented and diagnosed.

use std::collections::BTreeSet;
use std::fmt;

/// Identifier of a cell, unique within one table.
pub type CellId = u32;

/// Axis-aligned rectangle in pixel coordinates. The y axis grows downward
/// (image convention), so `y1` is the top edge and `y2` the bottom edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    /// True when all coordinates are finite and the box has positive area.
    pub fn is_valid(&self) -> bool {
        let finite = self.x1.is_finite()
            && self.y1.is_finite()
            && self.x2.is_finite()
            && self.y2.is_finite();
        finite && self.x1 < self.x2 && self.y1 < self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Smallest box covering both `self` and `other`.
    pub fn cover(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    /// True when `other` lies entirely inside `self` (edges may touch).
    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

/// Logical grid placement of a cell: start/end row and start/end column,
/// inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpanIndices {
    pub sr: usize,
    pub er: usize,
    pub sc: usize,
    pub ec: usize,
}

impl SpanIndices {
    pub fn new(sr: usize, er: usize, sc: usize, ec: usize) -> Self {
        SpanIndices { sr, er, sc, ec }
    }

    pub fn is_valid(&self) -> bool {
        self.sr <= self.er && self.sc <= self.ec
    }

    pub fn row_span(&self) -> usize {
        self.er - self.sr + 1
    }

    pub fn col_span(&self) -> usize {
        self.ec - self.sc + 1
    }

    /// True when the two row intervals share at least one grid row.
    pub fn rows_overlap(&self, other: &SpanIndices) -> bool {
        self.sr <= other.er && other.sr <= self.er
    }

    /// True when the two column intervals share at least one grid column.
    pub fn cols_overlap(&self, other: &SpanIndices) -> bool {
        self.sc <= other.ec && other.sc <= self.ec
    }

    /// True when the two span rectangles share at least one grid square.
    pub fn grid_overlap(&self, other: &SpanIndices) -> bool {
        self.rows_overlap(other) && self.cols_overlap(other)
    }
}

/// One table cell: a box, optional logical placement, and text content.
///
/// Emptiness is derived from the content (blank after trimming) instead of
/// being stored, so the two can never contradict each other.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBox {
    pub id: CellId,
    pub bbox: BBox,
    pub spans: Option<SpanIndices>,
    pub content: String,
}

impl CellBox {
    pub fn new(id: CellId, bbox: BBox, content: impl Into<String>) -> Self {
        CellBox {
            id,
            bbox,
            spans: None,
            content: content.into(),
        }
    }

    pub fn with_spans(
        id: CellId,
        bbox: BBox,
        spans: SpanIndices,
        content: impl Into<String>,
    ) -> Self {
        CellBox {
            id,
            bbox,
            spans: Some(spans),
            content: content.into(),
        }
    }

    /// A cell is empty (blank) when its content trims to nothing.
    pub fn is_empty(&self) -> bool {
        self.content.trim().is_empty()
    }
}

/// An annotated table: an ordered list of cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableAnnotation {
    pub cells: Vec<CellBox>,
}

impl TableAnnotation {
    pub fn new(cells: Vec<CellBox>) -> Self {
        TableAnnotation { cells }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// True when every cell carries span indices.
    pub fn all_spanned(&self) -> bool {
        self.cells.iter().all(|c| c.spans.is_some())
    }

    /// Id of the first cell without spans, if any.
    pub fn first_unspanned(&self) -> Option<CellId> {
        self.cells.iter().find(|c| c.spans.is_none()).map(|c| c.id)
    }

    pub fn cell(&self, id: CellId) -> Option<&CellBox> {
        self.cells.iter().find(|c| c.id == id)
    }

    /// Number of grid rows implied by the spans (`max er + 1`), 0 for an
    /// empty table. Cells without spans are ignored.
    pub fn n_rows(&self) -> usize {
        self.cells
            .iter()
            .filter_map(|c| c.spans)
            .map(|s| s.er + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.cells
            .iter()
            .filter_map(|c| c.spans)
            .map(|s| s.ec + 1)
            .max()
            .unwrap_or(0)
    }
}

/// A single invariant violation found by [`validate_table`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Box has a NaN or infinite coordinate.
    NonFiniteBox { cell: CellId },
    /// Box has zero or negative extent on some axis.
    DegenerateBox { cell: CellId },
    /// Span indices have start after end.
    SpanOrder { cell: CellId },
    /// Two cells share an id.
    DuplicateId { id: CellId },
    /// Two span rectangles overlap on the logical grid.
    SpanOverlap { first: CellId, second: CellId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteBox { cell } => {
                write!(f, "cell {cell}: box coordinate is not finite")
            }
            Violation::DegenerateBox { cell } => {
                write!(f, "cell {cell}: box violates x1 < x2 and y1 < y2")
            }
            Violation::SpanOrder { cell } => {
                write!(f, "cell {cell}: span indices violate sr <= er and sc <= ec")
            }
            Violation::DuplicateId { id } => write!(f, "cell id {id} appears more than once"),
            Violation::SpanOverlap { first, second } => {
                write!(f, "cells {first} and {second}: span rectangles overlap")
            }
        }
    }
}

/// Checks every type invariant and returns the violations found, empty when
/// the table is valid. The check is pure; calling it twice yields the same
/// list.
///
/// Span-rectangle overlap is only checked when all cells carry spans, since a
/// partially spanned table has no well-defined grid yet.
pub fn validate_table(table: &TableAnnotation) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for cell in &table.cells {
        if !seen.insert(cell.id) {
            violations.push(Violation::DuplicateId { id: cell.id });
        }
        let b = &cell.bbox;
        if !(b.x1.is_finite() && b.y1.is_finite() && b.x2.is_finite() && b.y2.is_finite()) {
            violations.push(Violation::NonFiniteBox { cell: cell.id });
        } else if !(b.x1 < b.x2 && b.y1 < b.y2) {
            violations.push(Violation::DegenerateBox { cell: cell.id });
        }
        if let Some(s) = cell.spans {
            if !s.is_valid() {
                violations.push(Violation::SpanOrder { cell: cell.id });
            }
        }
    }
    if table.all_spanned() {
        for (i, a) in table.cells.iter().enumerate() {
            for b in &table.cells[i + 1..] {
                let (sa, sb) = (a.spans.unwrap(), b.spans.unwrap());
                if sa.is_valid() && sb.is_valid() && sa.grid_overlap(&sb) {
                    violations.push(Violation::SpanOverlap {
                        first: a.id,
                        second: b.id,
                    });
                }
            }
        }
    }
    violations
}

/// Square binary matrix stored densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    /// All-zero matrix of dimension `n`.
    pub fn new(n: usize) -> Self {
        BinaryMatrix {
            n,
            data: vec![false; n * n],
        }
    }

    /// Matrix with ones on the diagonal only.
    pub fn identity(n: usize) -> Self {
        let mut m = BinaryMatrix::new(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.n + j] = value;
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_symmetric(&mut self, i: usize, j: usize, value: bool) {
        self.set(i, j, value);
        self.set(j, i, value);
    }

    /// First index pair where the matrix differs from its transpose.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) != self.get(j, i) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry().is_none()
    }

    /// Builds from nested 0/1 rows, rejecting ragged shapes and entries
    /// outside {0, 1}.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, String> {
        let n = rows.len();
        let mut m = BinaryMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(format!(
                    "row {i} has length {} in a {n}x{n} matrix",
                    row.len()
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => return Err(format!("entry ({i}, {j}) is {other}, expected 0 or 1")),
                }
            }
        }
        Ok(m)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }
}

/// The pair of row/column adjacency matrices describing which cells share a
/// row and which share a column. Entry `(i, j)` of the row matrix is 1 iff
/// cells `i` and `j` belong to some common row; same for columns.
///
/// Matrices produced by this toolkit carry a unit diagonal (a cell trivially
/// shares its own row and column). Consumers mask the diagonal when reading
/// pair labels, so external input with a zero diagonal is accepted as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrices {
    row: BinaryMatrix,
    col: BinaryMatrix,
}

impl AdjacencyMatrices {
    /// Pairs the two matrices, requiring equal dimensions. Symmetry is not
    /// enforced here; operations that require it check and report it.
    pub fn new(row: BinaryMatrix, col: BinaryMatrix) -> Result<Self, crate::error::Error> {
        if row.n() != col.n() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: row.n(),
                got: col.n(),
            });
        }
        Ok(AdjacencyMatrices { row, col })
    }

    pub fn n(&self) -> usize {
        self.row.n()
    }

    pub fn row(&self) -> &BinaryMatrix {
        &self.row
    }

    pub fn col(&self) -> &BinaryMatrix {
        &self.col
    }
}

/// Direction of a neighbor relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Horizontal => write!(f, "horizontal"),
            Direction::Vertical => write!(f, "vertical"),
        }
    }
}

/// Directed neighbor relation between two non-empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    pub from_cell: CellId,
    pub to_cell: CellId,
    pub direction: Direction,
}

/// Deduplicated set of relations; the unit of structure-recognition scoring.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationSet {
    relations: BTreeSet<Relation>,
}

impl RelationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, relation: Relation) -> bool {
        self.relations.insert(relation)
    }

    pub fn contains(&self, relation: &Relation) -> bool {
        self.relations.contains(relation)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }
}

impl FromIterator<Relation> for RelationSet {
    fn from_iter<T: IntoIterator<Item = Relation>>(iter: T) -> Self {
        RelationSet {
            relations: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spanned_cell(id: CellId, sr: usize, er: usize, sc: usize, ec: usize) -> CellBox {
        let bbox = BBox::new(
            sc as f64 * 10.0,
            sr as f64 * 10.0,
            (ec + 1) as f64 * 10.0,
            (er + 1) as f64 * 10.0,
        );
        CellBox::with_spans(id, bbox, SpanIndices::new(sr, er, sc, ec), format!("c{id}"))
    }

    #[test]
    fn valid_table_has_no_violations() {
        let table = TableAnnotation::new(vec![
            spanned_cell(0, 0, 0, 0, 0),
            spanned_cell(1, 0, 0, 1, 1),
            spanned_cell(2, 1, 1, 0, 0),
            spanned_cell(3, 1, 1, 1, 1),
        ]);
        assert!(validate_table(&table).is_empty());
    }

    #[test]
    fn degenerate_box_names_the_cell() {
        let mut table = TableAnnotation::new(vec![spanned_cell(7, 0, 0, 0, 0)]);
        table.cells[0].bbox.x2 = table.cells[0].bbox.x1;
        let violations = validate_table(&table);
        assert_eq!(violations, vec![Violation::DegenerateBox { cell: 7 }]);
    }

    #[test]
    fn non_finite_box_is_reported() {
        let mut table = TableAnnotation::new(vec![spanned_cell(3, 0, 0, 0, 0)]);
        table.cells[0].bbox.y1 = f64::NAN;
        assert_eq!(
            validate_table(&table),
            vec![Violation::NonFiniteBox { cell: 3 }]
        );
    }

    #[test]
    fn span_overlap_names_both_cells() {
        // Both cells claim grid square (0, 0). Oracle: pairwise rectangle
        // intersection of (sr..er, sc..ec) ranges, checked by hand.
        let table = TableAnnotation::new(vec![
            spanned_cell(0, 0, 0, 0, 0),
            spanned_cell(1, 0, 1, 0, 1),
        ]);
        let violations = validate_table(&table);
        assert_eq!(
            violations,
            vec![Violation::SpanOverlap {
                first: 0,
                second: 1
            }]
        );
    }

    #[test]
    fn duplicate_ids_reported() {
        let table = TableAnnotation::new(vec![
            spanned_cell(0, 0, 0, 0, 0),
            spanned_cell(0, 1, 1, 1, 1),
        ]);
        assert!(validate_table(&table).contains(&Violation::DuplicateId { id: 0 }));
    }

    #[test]
    fn validation_is_pure() {
        let mut table = TableAnnotation::new(vec![spanned_cell(0, 0, 0, 0, 0)]);
        table.cells[0].bbox.x2 = -1.0;
        assert_eq!(validate_table(&table), validate_table(&table));
    }

    #[test]
    fn emptiness_derives_from_content() {
        let cell = CellBox::new(0, BBox::new(0.0, 0.0, 1.0, 1.0), "  \t ");
        assert!(cell.is_empty());
        let cell = CellBox::new(0, BBox::new(0.0, 0.0, 1.0, 1.0), " x ");
        assert!(!cell.is_empty());
    }

    #[test]
    fn binary_matrix_from_rows_rejects_bad_input() {
        assert!(BinaryMatrix::from_rows(&[vec![1, 0], vec![1]]).is_err());
        assert!(BinaryMatrix::from_rows(&[vec![2]]).is_err());
        let m = BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn asymmetry_detection() {
        let mut m = BinaryMatrix::identity(3);
        m.set(0, 2, true);
        assert_eq!(m.asymmetry(), Some((0, 2)));
        m.set(2, 0, true);
        assert!(m.is_symmetric());
    }

    #[test]
    fn values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<TableAnnotation>();
        assert_send_sync::<CellBox>();
        assert_send_sync::<AdjacencyMatrices>();
        assert_send_sync::<RelationSet>();
    }
}
