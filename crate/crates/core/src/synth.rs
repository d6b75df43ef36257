//! Deterministic synthetic-table generator and a corruption pass that mimics
//! imperfect detector output.
//!
//! The generator is a reference data source for property tests and golden
//! files, so the whole procedure — including the order of random draws — is
//! part of its contract. All randomness comes from [`SplitMix64`] seeded with
//! the `seed` argument, consumed in this order:
//!
//! 1. *Merge pass.* Grid squares are visited in row-major order. When the
//!    visited square is the anchor (top-left square) of its cell, one `f64`
//!    is drawn; while it is below `merge_prob`, one `u64` is drawn whose low
//!    bit picks the direction (0 = right, 1 = down), the merge is attempted,
//!    and on success another `f64` is drawn to try chaining. A merge is only
//!    legal when the union of the two cells is a rectangle and every grid row
//!    retains at least one single-row cell and every grid column at least one
//!    single-column cell afterwards. That guard keeps each grid line
//!    observable in the adjacency matrices, which is exactly the condition
//!    under which span recovery from the matrices is lossless.
//! 2. *Content pass.* Cells sorted by `(sr, sc)` get ids `0..n`; one `f64`
//!    per cell decides emptiness against `empty_prob`; non-empty cells get
//!    the token `c{id}` as content.
//! 3. *Jitter pass.* Per cell in id order, four `f64` draws perturb
//!    `x1, y1, x2, y2` in that order, each by `(2u - 1) * m` where `m` caps
//!    the requested jitter at 24.5% of the box extent on that axis so boxes
//!    stay valid.
//!
//! Grid squares measure 60 x 30 pixels.

use crate::error::{Error, Result};
use crate::model::{BBox, CellBox, SpanIndices, TableAnnotation};
use crate::rng::SplitMix64;

pub const CELL_WIDTH: f64 = 60.0;
pub const CELL_HEIGHT: f64 = 30.0;

/// Generates a table of `rows x cols` grid squares with merged spans, empty
/// cells and box jitter. Spans are always exact; only boxes are perturbed.
pub fn generate(
    seed: u64,
    rows: usize,
    cols: usize,
    merge_prob: f64,
    empty_prob: f64,
    jitter: f64,
) -> Result<TableAnnotation> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParams(
            "rows and cols must be at least 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&merge_prob) {
        return Err(Error::InvalidParams(format!(
            "merge_prob must be in [0, 1), got {merge_prob}"
        )));
    }
    if !(0.0..1.0).contains(&empty_prob) {
        return Err(Error::InvalidParams(format!(
            "empty_prob must be in [0, 1), got {empty_prob}"
        )));
    }
    if !jitter.is_finite() || jitter < 0.0 {
        return Err(Error::InvalidParams(format!(
            "jitter must be finite and non-negative, got {jitter}"
        )));
    }

    let mut rng = SplitMix64::new(seed);
    let mut spans = merge_pass(&mut rng, rows, cols, merge_prob);
    spans.sort_by_key(|s| (s.sr, s.sc));

    let mut cells = Vec::with_capacity(spans.len());
    for (id, span) in spans.iter().enumerate() {
        let empty = rng.next_f64() < empty_prob;
        let content = if empty {
            String::new()
        } else {
            format!("c{id}")
        };
        let bbox = BBox::new(
            span.sc as f64 * CELL_WIDTH,
            span.sr as f64 * CELL_HEIGHT,
            (span.ec + 1) as f64 * CELL_WIDTH,
            (span.er + 1) as f64 * CELL_HEIGHT,
        );
        cells.push(CellBox::with_spans(id as u32, bbox, *span, content));
    }

    for cell in &mut cells {
        let mx = jitter.min(0.245 * cell.bbox.width());
        let my = jitter.min(0.245 * cell.bbox.height());
        let b = &mut cell.bbox;
        b.x1 += (2.0 * rng.next_f64() - 1.0) * mx;
        b.y1 += (2.0 * rng.next_f64() - 1.0) * my;
        b.x2 += (2.0 * rng.next_f64() - 1.0) * mx;
        b.y2 += (2.0 * rng.next_f64() - 1.0) * my;
    }

    Ok(TableAnnotation::new(cells))
}

fn merge_pass(rng: &mut SplitMix64, rows: usize, cols: usize, merge_prob: f64) -> Vec<SpanIndices> {
    // One span rectangle per unit square initially; `owner` maps squares to
    // indices into `spans`, `alive` marks rectangles not absorbed by a merge.
    let mut spans: Vec<SpanIndices> = Vec::with_capacity(rows * cols);
    let mut owner = vec![0usize; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            owner[r * cols + c] = spans.len();
            spans.push(SpanIndices::new(r, r, c, c));
        }
    }
    let mut alive = vec![true; spans.len()];

    for r in 0..rows {
        for c in 0..cols {
            let idx = owner[r * cols + c];
            if !alive[idx] || (spans[idx].sr, spans[idx].sc) != (r, c) {
                continue;
            }
            while rng.next_f64() < merge_prob {
                let go_down = rng.next_u64() & 1 == 1;
                if !try_merge(&mut spans, &mut owner, &mut alive, rows, cols, idx, go_down) {
                    break;
                }
            }
        }
    }

    spans
        .into_iter()
        .zip(alive)
        .filter_map(|(s, keep)| keep.then_some(s))
        .collect()
}

fn try_merge(
    spans: &mut [SpanIndices],
    owner: &mut [usize],
    alive: &mut [bool],
    rows: usize,
    cols: usize,
    idx: usize,
    go_down: bool,
) -> bool {
    let s = spans[idx];
    let target = if go_down {
        if s.er + 1 >= rows {
            return false;
        }
        owner[(s.er + 1) * cols + s.sc]
    } else {
        if s.ec + 1 >= cols {
            return false;
        }
        owner[s.sr * cols + s.ec + 1]
    };
    let t = spans[target];
    let compatible = if go_down {
        t.sc == s.sc && t.ec == s.ec && t.sr == s.er + 1
    } else {
        t.sr == s.sr && t.er == s.er && t.sc == s.ec + 1
    };
    if !compatible {
        return false;
    }

    let merged = SpanIndices::new(s.sr, s.er.max(t.er), s.sc, s.ec.max(t.ec));
    if !witnesses_kept(spans, alive, rows, cols, idx, target, &merged) {
        return false;
    }

    spans[idx] = merged;
    alive[target] = false;
    for rr in merged.sr..=merged.er {
        for cc in merged.sc..=merged.ec {
            owner[rr * cols + cc] = idx;
        }
    }
    true
}

/// Would every grid row still own a single-row cell and every grid column a
/// single-column cell if `idx` absorbed `target` into `merged`?
fn witnesses_kept(
    spans: &[SpanIndices],
    alive: &[bool],
    rows: usize,
    cols: usize,
    idx: usize,
    target: usize,
    merged: &SpanIndices,
) -> bool {
    let effective = |i: usize| -> Option<SpanIndices> {
        if i == target || !alive[i] {
            None
        } else if i == idx {
            Some(*merged)
        } else {
            Some(spans[i])
        }
    };
    let mut row_witness = vec![false; rows];
    let mut col_witness = vec![false; cols];
    for i in 0..spans.len() {
        if let Some(s) = effective(i) {
            if s.sr == s.er {
                row_witness[s.sr] = true;
            }
            if s.sc == s.ec {
                col_witness[s.sc] = true;
            }
        }
    }
    row_witness.into_iter().all(|w| w) && col_witness.into_iter().all(|w| w)
}

/// Simulates imperfect detector output: drops each cell with probability
/// `drop_prob` and perturbs every surviving box edge by a uniform offset of
/// at most `shift` times the box extent on that axis (capped at 0.49 so boxes
/// stay valid). Spans are stripped; ids and content are preserved so output
/// can still be aligned with its origin.
///
/// Draw order per cell: one `f64` for the drop decision, then for survivors
/// four `f64` for `x1, y1, x2, y2`.
pub fn corrupt(table: &TableAnnotation, seed: u64, drop_prob: f64, shift: f64) -> TableAnnotation {
    let shift = if shift.is_finite() {
        shift.clamp(0.0, 0.49)
    } else {
        0.0
    };
    let mut rng = SplitMix64::new(seed);
    let mut cells = Vec::new();
    for cell in &table.cells {
        if rng.next_f64() < drop_prob {
            continue;
        }
        let mut bbox = cell.bbox;
        let (mx, my) = (shift * bbox.width(), shift * bbox.height());
        bbox.x1 += (2.0 * rng.next_f64() - 1.0) * mx;
        bbox.y1 += (2.0 * rng.next_f64() - 1.0) * my;
        bbox.x2 += (2.0 * rng.next_f64() - 1.0) * mx;
        bbox.y2 += (2.0 * rng.next_f64() - 1.0) * my;
        cells.push(CellBox::new(cell.id, bbox, cell.content.clone()));
    }
    TableAnnotation::new(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::iou;
    use crate::model::validate_table;

    #[test]
    fn plain_grid_is_exact() {
        let table = generate(42, 2, 2, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(table.n_cells(), 4);
        let expected = [(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 1, 1)];
        for (cell, &(sr, er, sc, ec)) in table.cells.iter().zip(&expected) {
            assert_eq!(cell.spans, Some(SpanIndices::new(sr, er, sc, ec)));
        }
        assert_eq!(table.cells[3].bbox, BBox::new(60.0, 30.0, 120.0, 60.0));
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate(123, 6, 7, 0.3, 0.2, 3.0).unwrap();
        let b = generate(123, 6, 7, 0.3, 0.2, 3.0).unwrap();
        assert_eq!(a, b);
        let c = generate(124, 6, 7, 0.3, 0.2, 3.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_is_valid_and_partitions_the_grid() {
        for seed in 0..50 {
            let (rows, cols) = (1 + seed as usize % 8, 1 + (seed as usize / 3) % 8);
            let table = generate(seed, rows, cols, 0.3, 0.2, 2.0).unwrap();
            assert!(validate_table(&table).is_empty(), "seed {seed}");
            // Exhaustive coverage: every grid square owned exactly once.
            let mut covered = vec![0u32; rows * cols];
            for cell in &table.cells {
                let s = cell.spans.unwrap();
                for r in s.sr..=s.er {
                    for c in s.sc..=s.ec {
                        covered[r * cols + c] += 1;
                    }
                }
            }
            assert!(covered.iter().all(|&c| c == 1), "seed {seed}");
        }
    }

    #[test]
    fn every_row_and_column_keeps_a_witness() {
        // The merge guard must leave a single-row cell in every row and a
        // single-column cell in every column; span recovery relies on it.
        for seed in 0..50 {
            let table = generate(seed, 6, 6, 0.45, 0.0, 0.0).unwrap();
            let rows = table.n_rows();
            let cols = table.n_cols();
            for r in 0..rows {
                assert!(
                    table
                        .cells
                        .iter()
                        .any(|c| c.spans.unwrap().sr == r && c.spans.unwrap().er == r),
                    "seed {seed} row {r}"
                );
            }
            for c in 0..cols {
                assert!(
                    table
                        .cells
                        .iter()
                        .any(|x| x.spans.unwrap().sc == c && x.spans.unwrap().ec == c),
                    "seed {seed} col {c}"
                );
            }
        }
    }

    #[test]
    fn merging_produces_spanning_cells() {
        let mut saw_row_span = false;
        let mut saw_col_span = false;
        for seed in 0..30 {
            let table = generate(seed, 5, 5, 0.4, 0.0, 0.0).unwrap();
            for cell in &table.cells {
                let s = cell.spans.unwrap();
                saw_row_span |= s.row_span() > 1;
                saw_col_span |= s.col_span() > 1;
            }
        }
        assert!(saw_row_span && saw_col_span);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(generate(0, 0, 3, 0.0, 0.0, 0.0).is_err());
        assert!(generate(0, 3, 3, 1.0, 0.0, 0.0).is_err());
        assert!(generate(0, 3, 3, 0.0, -0.1, 0.0).is_err());
        assert!(generate(0, 3, 3, 0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn corrupt_noop_strips_spans_only() {
        let table = generate(9, 3, 3, 0.2, 0.1, 0.0).unwrap();
        let corrupted = corrupt(&table, 1, 0.0, 0.0);
        assert_eq!(corrupted.n_cells(), table.n_cells());
        for (orig, out) in table.cells.iter().zip(&corrupted.cells) {
            assert_eq!(orig.bbox, out.bbox);
            assert_eq!(orig.id, out.id);
            assert_eq!(orig.content, out.content);
            assert!(out.spans.is_none());
        }
    }

    #[test]
    fn corrupt_can_drop_everything() {
        let table = generate(9, 3, 3, 0.0, 0.0, 0.0).unwrap();
        let corrupted = corrupt(&table, 1, 1.0, 0.0);
        assert_eq!(corrupted.n_cells(), 0);
    }

    #[test]
    fn shift_keeps_overlap_above_worst_case_bound() {
        // Each edge moves at most 0.1 of the extent, so the worst case is a
        // box shrunk to 0.8 of each extent against one grown to 1.2:
        // IoU >= (0.8 / 1.2)^2.
        let bound = (0.8f64 / 1.2).powi(2) - 1e-9;
        for seed in 0..20 {
            let table = generate(seed, 4, 4, 0.0, 0.0, 0.0).unwrap();
            let corrupted = corrupt(&table, seed + 1, 0.0, 0.1);
            for (orig, out) in table.cells.iter().zip(&corrupted.cells) {
                let overlap = iou(&orig.bbox, &out.bbox);
                assert!(
                    overlap >= bound,
                    "seed {seed} cell {} iou {overlap}",
                    orig.id
                );
            }
        }
    }
}
