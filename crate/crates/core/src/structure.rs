//! Conversions between the two logical-structure representations — span
//! indices and row/column adjacency matrices — plus a consistency diagnostic
//! and the balanced pair sampler used for classifier training.
//!
//! The adjacency-to-spans direction is the post-processing step that turns
//! model output (boxes plus predicted matrices) back into grid placements:
//! cells are visited in coordinate order; each still-unlabelled cell opens a
//! fresh row index which is propagated to every cell connected to it in the
//! row matrix; a cell's start/end row are the min/max of the indices it
//! collected. Columns work the same way with x-sorting and the column matrix.
//!
//! Visit order matters when spanning cells are present: a cell spanning rows
//! 0-1 must not open the index for row 0, or the cells of rows 0 and 1 would
//! collapse into one index set. Sorting by `(y1, y2)` — shorter cells first
//! within a start group — makes the reconstruction exact for every matrix
//! derived from a span assignment in which each row and column contains at
//! least one non-spanning cell. Inconsistent matrices (as produced by an
//! imperfect predictor) are processed as-is without repair;
//! [`check_consistency`] diagnoses them.

use crate::error::{Error, Result};
use crate::model::{
    validate_table, AdjacencyMatrices, BinaryMatrix, CellBox, SpanIndices, TableAnnotation,
};
use crate::rng::SplitMix64;

/// Builds the row/column adjacency matrices from span indices. Entry `(i, j)`
/// of the row matrix is 1 iff the row intervals `[sr, er]` of cells `i` and
/// `j` intersect; columns analogously. The diagonal is 1 and the result is
/// symmetric.
pub fn spans_to_adjacency(table: &TableAnnotation) -> Result<AdjacencyMatrices> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let violations = validate_table(table);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidTable(list.join("; ")));
    }
    Ok(adjacency_from_spans_unchecked(table))
}

/// Matrix construction without table validation; the round-trip diagnostic
/// feeds it span assignments that may legitimately overlap.
fn adjacency_from_spans_unchecked(table: &TableAnnotation) -> AdjacencyMatrices {
    let n = table.n_cells();
    let mut row = BinaryMatrix::identity(n);
    let mut col = BinaryMatrix::identity(n);
    for i in 0..n {
        let si = table.cells[i].spans.unwrap();
        for j in i + 1..n {
            let sj = table.cells[j].spans.unwrap();
            if si.rows_overlap(&sj) {
                row.set_symmetric(i, j, true);
            }
            if si.cols_overlap(&sj) {
                col.set_symmetric(i, j, true);
            }
        }
    }
    AdjacencyMatrices::new(row, col).expect("matrices share the cell count")
}

fn check_adjacency(n_cells: usize, adj: &AdjacencyMatrices) -> Result<()> {
    if adj.n() != n_cells {
        return Err(Error::DimensionMismatch {
            expected: n_cells,
            got: adj.n(),
        });
    }
    if let Some((i, j)) = adj.row().asymmetry() {
        return Err(Error::NonSymmetric {
            matrix: "row",
            i,
            j,
        });
    }
    if let Some((i, j)) = adj.col().asymmetry() {
        return Err(Error::NonSymmetric {
            matrix: "col",
            i,
            j,
        });
    }
    Ok(())
}

/// One axis of the index-propagation pass. `order` is the visit order;
/// returns `(min, max)` of the collected belonging list per cell.
fn assign_axis(order: &[usize], matrix: &BinaryMatrix) -> Vec<(usize, usize)> {
    let n = matrix.n();
    let mut bounds: Vec<Option<(usize, usize)>> = vec![None; n];
    let extend = |cell: usize, index: usize, bounds: &mut Vec<Option<(usize, usize)>>| {
        bounds[cell] = Some(match bounds[cell] {
            None => (index, index),
            Some((lo, hi)) => (lo.min(index), hi.max(index)),
        });
    };
    let mut next_index = 0;
    for &i in order {
        if bounds[i].is_some() {
            continue;
        }
        let index = next_index;
        next_index += 1;
        extend(i, index, &mut bounds);
        for j in 0..n {
            if j != i && matrix.get(i, j) {
                extend(j, index, &mut bounds);
            }
        }
    }
    bounds.into_iter().map(|b| b.unwrap()).collect()
}

/// Recovers span indices from boxes and adjacency matrices (the inverse of
/// [`spans_to_adjacency`] on consistent input). Any spans already present on
/// the input cells are ignored and recomputed.
pub fn adjacency_to_spans(cells: &[CellBox], adj: &AdjacencyMatrices) -> Result<TableAnnotation> {
    check_adjacency(cells.len(), adj)?;
    let n = cells.len();

    let mut row_order: Vec<usize> = (0..n).collect();
    row_order.sort_by(|&a, &b| {
        let (ba, bb) = (&cells[a].bbox, &cells[b].bbox);
        ba.y1
            .total_cmp(&bb.y1)
            .then(ba.y2.total_cmp(&bb.y2))
            .then(ba.x1.total_cmp(&bb.x1))
            .then(cells[a].id.cmp(&cells[b].id))
    });
    let mut col_order: Vec<usize> = (0..n).collect();
    col_order.sort_by(|&a, &b| {
        let (ba, bb) = (&cells[a].bbox, &cells[b].bbox);
        ba.x1
            .total_cmp(&bb.x1)
            .then(ba.x2.total_cmp(&bb.x2))
            .then(ba.y1.total_cmp(&bb.y1))
            .then(cells[a].id.cmp(&cells[b].id))
    });

    let row_bounds = assign_axis(&row_order, adj.row());
    let col_bounds = assign_axis(&col_order, adj.col());

    let cells = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let (sr, er) = row_bounds[i];
            let (sc, ec) = col_bounds[i];
            CellBox {
                spans: Some(SpanIndices::new(sr, er, sc, ec)),
                ..cell.clone()
            }
        })
        .collect();
    Ok(TableAnnotation::new(cells))
}

/// Outcome of [`check_consistency`]: pairs whose adjacency changed across a
/// spans round trip, per matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConsistencyReport {
    pub row_changed: Vec<(usize, usize)>,
    pub col_changed: Vec<(usize, usize)>,
}

impl ConsistencyReport {
    /// True when both matrices admit an interval representation under the
    /// given cell geometry.
    pub fn is_consistent(&self) -> bool {
        self.row_changed.is_empty() && self.col_changed.is_empty()
    }
}

/// Diagnoses whether the matrices are realizable as row/column intervals for
/// these cells: runs [`adjacency_to_spans`] followed by
/// [`spans_to_adjacency`] and lists every cell pair whose entry changed.
pub fn check_consistency(cells: &[CellBox], adj: &AdjacencyMatrices) -> Result<ConsistencyReport> {
    let spanned = adjacency_to_spans(cells, adj)?;
    let rebuilt = adjacency_from_spans_unchecked(&spanned);
    let n = adj.n();
    let mut report = ConsistencyReport::default();
    for i in 0..n {
        for j in i + 1..n {
            if adj.row().get(i, j) != rebuilt.row().get(i, j) {
                report.row_changed.push((i, j));
            }
            if adj.col().get(i, j) != rebuilt.col().get(i, j) {
                report.col_changed.push((i, j));
            }
        }
    }
    Ok(report)
}

/// A sampled cell pair with its adjacency labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledPair {
    pub i: usize,
    pub j: usize,
    pub row_label: bool,
    pub col_label: bool,
}

/// Draws `k` unordered cell pairs with class balancing, deterministically for
/// a fixed seed.
///
/// Pairs are bucketed by their `(row label, column label)` pair, the diagonal
/// excluded. Bucket weights are chosen so that the expected number of
/// row-positive draws equals the row-negative ones, and independently for
/// column labels, whenever both classes of an axis are non-empty; if the two
/// targets cannot be met together, row balance wins. Within a bucket, draws
/// go through a seeded shuffle without replacement until the bucket is
/// exhausted, then with replacement.
pub fn sample_pairs(adj: &AdjacencyMatrices, k: usize, seed: u64) -> Result<Vec<SampledPair>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = adj.n();
    if n < 2 {
        return Err(Error::InsufficientCells(n));
    }

    // Bucket index: bit 1 = row-positive, bit 0 = col-positive.
    let mut buckets: [Vec<SampledPair>; 4] = Default::default();
    for i in 0..n {
        for j in i + 1..n {
            let pair = SampledPair {
                i,
                j,
                row_label: adj.row().get(i, j),
                col_label: adj.col().get(i, j),
            };
            let idx = (usize::from(pair.row_label) << 1) | usize::from(pair.col_label);
            buckets[idx].push(pair);
        }
    }

    let weights = bucket_weights([
        !buckets[0].is_empty(),
        !buckets[1].is_empty(),
        !buckets[2].is_empty(),
        !buckets[3].is_empty(),
    ]);

    let mut rng = SplitMix64::new(seed);
    for bucket in buckets.iter_mut() {
        if !bucket.is_empty() {
            rng.shuffle(bucket);
        }
    }

    let mut cursors = [0usize; 4];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut chosen = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
        for (idx, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            if u < acc {
                chosen = idx;
                break;
            }
            chosen = idx; // fall through to the last positive bucket
        }
        let bucket = &buckets[chosen];
        let pick = if cursors[chosen] < bucket.len() {
            let p = bucket[cursors[chosen]];
            cursors[chosen] += 1;
            p
        } else {
            bucket[rng.next_below(bucket.len() as u64) as usize]
        };
        out.push(pick);
    }
    Ok(out)
}

/// Weights for the four `(row, col)` label buckets, indexed as in
/// [`sample_pairs`]. `present[idx]` marks non-empty buckets.
fn bucket_weights(present: [bool; 4]) -> [f64; 4] {
    let [mm, mp, pm, pp] = present;
    let row_ok = (pp || pm) && (mp || mm);
    let col_ok = (pp || mp) && (pm || mm);

    // Solve for weights with both marginals at 1/2 where feasible; the free
    // parameter t is the weight of the (pos, pos) bucket and mirrors onto
    // (neg, neg).
    if row_ok && col_ok {
        let t = if !pp || !mm {
            0.0
        } else if !pm || !mp {
            0.5
        } else {
            0.25
        };
        let w = [t, 0.5 - t, 0.5 - t, t];
        let feasible = w
            .iter()
            .zip(present.iter())
            .all(|(&weight, &avail)| avail || weight == 0.0);
        if feasible {
            // Order in `w` is [mm, mp, pm, pp] by construction above.
            return [w[0], w[1], w[2], w[3]];
        }
    }
    if row_ok {
        // Balance rows only: 1/2 across available positive-row buckets, 1/2
        // across negative-row ones.
        let pos: f64 = if pp && pm { 0.25 } else { 0.5 };
        let neg: f64 = if mp && mm { 0.25 } else { 0.5 };
        return [
            if mm { neg } else { 0.0 },
            if mp { neg } else { 0.0 },
            if pm { pos } else { 0.0 },
            if pp { pos } else { 0.0 },
        ];
    }
    if col_ok {
        let pos: f64 = if pp && mp { 0.25 } else { 0.5 };
        let neg: f64 = if pm && mm { 0.25 } else { 0.5 };
        return [
            if mm { neg } else { 0.0 },
            if mp { pos } else { 0.0 },
            if pm { neg } else { 0.0 },
            if pp { pos } else { 0.0 },
        ];
    }
    // Single class on both axes: uniform over whatever exists, proportional
    // to bucket size is unnecessary since only one bucket can be non-empty
    // per axis combination; spread evenly over the non-empty ones.
    let count = present.iter().filter(|&&p| p).count().max(1);
    let w = 1.0 / count as f64;
    [
        if mm { w } else { 0.0 },
        if mp { w } else { 0.0 },
        if pm { w } else { 0.0 },
        if pp { w } else { 0.0 },
    ]
}
