//! Alignment loss over cell boxes and the composed training loss.
//!
//! Cells that start in the same row should share their top edge, cells ending
//! in the same row their bottom edge, and analogously for columns. The loss
//! sums squared coordinate differences over every unordered pair of cells
//! within each start/end group:
//!
//! ```text
//! l1 = sum over rows r, pairs {i, j} with sr_i = sr_j = r of (y1_i - y1_j)^2
//! l2 = same over er groups with y2
//! l3 = same over sc groups with x1
//! l4 = same over ec groups with x2
//! total = l1 + l2 + l3 + l4
//! ```
//!
//! Pairs are unordered and counted once; groups of one cell contribute
//! nothing. Group sums are accumulated in a canonical value order so the
//! breakdown is bit-identical under any permutation of the input cells.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::TableAnnotation;

/// Per-term breakdown of the alignment loss, in squared pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentLossBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub total: f64,
}

/// Gradient of the alignment loss with respect to one cell's box coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxGradient {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// Externally supplied loss terms composed with the alignment loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalLossInputs {
    pub l_box: f64,
    pub l_cls: f64,
    pub l_mask: f64,
    pub l_align: f64,
    pub l_gnn: f64,
}

/// Groups the coordinate of interest by group key, with each cell's position
/// in the table attached. Values within a group are sorted so downstream sums
/// do not depend on cell order.
fn grouped(
    table: &TableAnnotation,
    key: impl Fn(&crate::model::SpanIndices) -> usize,
    coord: impl Fn(&crate::model::BBox) -> f64,
) -> BTreeMap<usize, Vec<(f64, usize)>> {
    let mut groups: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for (pos, cell) in table.cells.iter().enumerate() {
        let s = cell.spans.unwrap();
        groups
            .entry(key(&s))
            .or_default()
            .push((coord(&cell.bbox), pos));
    }
    for values in groups.values_mut() {
        values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    groups
}

fn pair_term(groups: &BTreeMap<usize, Vec<(f64, usize)>>) -> f64 {
    let mut sum = 0.0;
    for values in groups.values() {
        for (i, &(a, _)) in values.iter().enumerate() {
            for &(b, _) in &values[i + 1..] {
                let d = a - b;
                sum += d * d;
            }
        }
    }
    sum
}

fn require_spans(table: &TableAnnotation) -> Result<()> {
    match table.first_unspanned() {
        Some(id) => Err(Error::MissingSpans(id)),
        None => Ok(()),
    }
}

/// Computes the four alignment terms and their sum.
pub fn alignment_loss(table: &TableAnnotation) -> Result<AlignmentLossBreakdown> {
    require_spans(table)?;
    let l1 = pair_term(&grouped(table, |s| s.sr, |b| b.y1));
    let l2 = pair_term(&grouped(table, |s| s.er, |b| b.y2));
    let l3 = pair_term(&grouped(table, |s| s.sc, |b| b.x1));
    let l4 = pair_term(&grouped(table, |s| s.ec, |b| b.x2));
    Ok(AlignmentLossBreakdown {
        l1,
        l2,
        l3,
        l4,
        total: l1 + l2 + l3 + l4,
    })
}

/// Analytic gradient of the total alignment loss, one entry per cell in table
/// order.
///
/// For a cell `c` in a start-row group `G`, the derivative with respect to its
/// top edge is `2 * sum over d in G, d != c of (y1_c - y1_d)`; coordinates not
/// shared with any group peer have zero gradient.
pub fn alignment_loss_grad(table: &TableAnnotation) -> Result<Vec<BoxGradient>> {
    require_spans(table)?;
    let mut grads = vec![BoxGradient::default(); table.n_cells()];

    let mut accumulate = |groups: BTreeMap<usize, Vec<(f64, usize)>>,
                          write: &mut dyn FnMut(&mut BoxGradient, f64)| {
        for values in groups.values() {
            let m = values.len() as f64;
            if values.len() < 2 {
                continue;
            }
            let sum: f64 = values.iter().map(|&(v, _)| v).sum();
            for &(v, pos) in values {
                write(&mut grads[pos], 2.0 * (m * v - sum));
            }
        }
    };

    accumulate(grouped(table, |s| s.sr, |b| b.y1), &mut |g, v| g.y1 = v);
    accumulate(grouped(table, |s| s.er, |b| b.y2), &mut |g, v| g.y2 = v);
    accumulate(grouped(table, |s| s.sc, |b| b.x1), &mut |g, v| g.x1 = v);
    accumulate(grouped(table, |s| s.ec, |b| b.x2), &mut |g, v| g.x2 = v);
    Ok(grads)
}

/// Five-term training loss: `l_box + l_cls + l_mask + l_align + l_gnn`.
pub fn total_loss(inputs: &TotalLossInputs) -> Result<f64> {
    total_loss_weighted(inputs, 1.0)
}

/// Same composition with the alignment term rescaled by `align_weight`.
pub fn total_loss_weighted(inputs: &TotalLossInputs, align_weight: f64) -> Result<f64> {
    let terms = [
        inputs.l_box,
        inputs.l_cls,
        inputs.l_mask,
        inputs.l_align,
        inputs.l_gnn,
        align_weight,
    ];
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(inputs.l_box + inputs.l_cls + inputs.l_mask + align_weight * inputs.l_align + inputs.l_gnn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, CellBox, SpanIndices, TableAnnotation};
    use crate::synth::generate;

    fn cell(id: u32, bbox: BBox, sr: usize, er: usize, sc: usize, ec: usize) -> CellBox {
        CellBox::with_spans(id, bbox, SpanIndices::new(sr, er, sc, ec), format!("c{id}"))
    }

    /// Independent oracle: enumerate every unordered pair and test the group
    /// predicate directly, without the grouping machinery above.
    fn brute_force_breakdown(table: &TableAnnotation) -> AlignmentLossBreakdown {
        let mut terms = [0.0f64; 4];
        let cells = &table.cells;
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                let (si, sj) = (cells[i].spans.unwrap(), cells[j].spans.unwrap());
                let (bi, bj) = (&cells[i].bbox, &cells[j].bbox);
                if si.sr == sj.sr {
                    terms[0] += (bi.y1 - bj.y1).powi(2);
                }
                if si.er == sj.er {
                    terms[1] += (bi.y2 - bj.y2).powi(2);
                }
                if si.sc == sj.sc {
                    terms[2] += (bi.x1 - bj.x1).powi(2);
                }
                if si.ec == sj.ec {
                    terms[3] += (bi.x2 - bj.x2).powi(2);
                }
            }
        }
        AlignmentLossBreakdown {
            l1: terms[0],
            l2: terms[1],
            l3: terms[2],
            l4: terms[3],
            total: terms.iter().sum(),
        }
    }

    fn three_cell_row() -> TableAnnotation {
        // Three cells starting in row 0 with y1 of 10, 12, 10; every other
        // group is a singleton because er/sc/ec all differ.
        TableAnnotation::new(vec![
            cell(0, BBox::new(0.0, 10.0, 10.0, 20.0), 0, 0, 0, 0),
            cell(1, BBox::new(10.0, 12.0, 20.0, 22.0), 0, 1, 1, 1),
            cell(2, BBox::new(20.0, 10.0, 30.0, 24.0), 0, 2, 2, 2),
        ])
    }

    #[test]
    fn aligned_grid_scores_zero() {
        let table = generate(11, 3, 4, 0.2, 0.0, 0.0).unwrap();
        let b = alignment_loss(&table).unwrap();
        assert_eq!((b.l1, b.l2, b.l3, b.l4, b.total), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn pairwise_example_matches_hand_count() {
        // (10-12)^2 + (10-10)^2 + (12-10)^2 = 8, confirmed by the brute-force
        // pair enumeration oracle.
        let table = three_cell_row();
        let b = alignment_loss(&table).unwrap();
        assert_eq!(b.l1, 8.0);
        assert_eq!(b.total, 8.0);
        let oracle = brute_force_breakdown(&table);
        assert_eq!(b.l1, oracle.l1);
        assert_eq!(b.total, oracle.total);
    }

    #[test]
    fn single_cell_scores_zero() {
        let table = TableAnnotation::new(vec![cell(0, BBox::new(1.0, 2.0, 3.0, 4.0), 0, 0, 0, 0)]);
        assert_eq!(alignment_loss(&table).unwrap().total, 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_tables() {
        for seed in 0..50 {
            let table = generate(seed, 5, 5, 0.25, 0.2, 6.0).unwrap();
            let b = alignment_loss(&table).unwrap();
            let o = brute_force_breakdown(&table);
            for (got, want) in [(b.l1, o.l1), (b.l2, o.l2), (b.l3, o.l3), (b.l4, o.l4)] {
                assert!((got - want).abs() <= 1e-9 * want.max(1.0), "seed {seed}");
            }
        }
    }

    #[test]
    fn gradient_on_aligned_table_is_zero() {
        let table = generate(3, 4, 4, 0.2, 0.0, 0.0).unwrap();
        for g in alignment_loss_grad(&table).unwrap() {
            assert_eq!((g.x1, g.y1, g.x2, g.y2), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn gradient_matches_hand_value() {
        // d/dy1 for the y1 = 12 cell: 2 * ((12-10) + (12-10)) = 8.
        let table = three_cell_row();
        let grads = alignment_loss_grad(&table).unwrap();
        assert_eq!(grads[1].y1, 8.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradient_matches_central_differences() {
        let h = 1e-4;
        for seed in 0..20 {
            let table = generate(seed, 3, 3, 0.2, 0.1, 4.0).unwrap();
            let grads = alignment_loss_grad(&table).unwrap();
            for pos in 0..table.n_cells() {
                for coord in 0..4 {
                    let mut plus = table.clone();
                    let mut minus = table.clone();
                    {
                        let (bp, bm) = (&mut plus.cells[pos].bbox, &mut minus.cells[pos].bbox);
                        match coord {
                            0 => {
                                bp.x1 += h;
                                bm.x1 -= h;
                            }
                            1 => {
                                bp.y1 += h;
                                bm.y1 -= h;
                            }
                            2 => {
                                bp.x2 += h;
                                bm.x2 -= h;
                            }
                            _ => {
                                bp.y2 += h;
                                bm.y2 -= h;
                            }
                        }
                    }
                    let fd = (alignment_loss(&plus).unwrap().total
                        - alignment_loss(&minus).unwrap().total)
                        / (2.0 * h);
                    let g = grads[pos];
                    let analytic = [g.x1, g.y1, g.x2, g.y2][coord];
                    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0);
                    assert!(
                        rel < 1e-6,
                        "seed {seed} cell {pos} coord {coord}: {analytic} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn group_gradients_sum_to_zero() {
        // Pairwise differences are translation invariant, so per-group
        // gradient components cancel.
        let table = three_cell_row();
        let grads = alignment_loss_grad(&table).unwrap();
        let sum: f64 = grads.iter().map(|g| g.y1).sum();
        assert_eq!(sum, 0.0);
    }

    #[test]
    fn breakdown_is_permutation_invariant_bitwise() {
        let table = generate(17, 5, 4, 0.3, 0.1, 7.0).unwrap();
        let mut reversed = table.clone();
        reversed.cells.reverse();
        let a = alignment_loss(&table).unwrap();
        let b = alignment_loss(&reversed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn translation_and_scaling_properties() {
        let table = generate(29, 4, 4, 0.2, 0.0, 5.0).unwrap();
        let base = alignment_loss(&table).unwrap().total;

        let mut shifted = table.clone();
        for c in &mut shifted.cells {
            c.bbox.x1 += 137.25;
            c.bbox.x2 += 137.25;
            c.bbox.y1 += 137.25;
            c.bbox.y2 += 137.25;
        }
        let t = alignment_loss(&shifted).unwrap().total;
        assert!((t - base).abs() <= 1e-9 * base.max(1.0));

        let s = 3.5;
        let mut scaled = table.clone();
        for c in &mut scaled.cells {
            c.bbox.x1 *= s;
            c.bbox.x2 *= s;
            c.bbox.y1 *= s;
            c.bbox.y2 *= s;
        }
        let q = alignment_loss(&scaled).unwrap().total;
        assert!((q - s * s * base).abs() <= 1e-9 * (s * s * base).max(1.0));
    }

    #[test]
    fn missing_spans_is_rejected() {
        let table = TableAnnotation::new(vec![CellBox::new(9, BBox::new(0.0, 0.0, 1.0, 1.0), "x")]);
        assert!(matches!(
            alignment_loss(&table),
            Err(Error::MissingSpans(9))
        ));
        assert!(matches!(
            alignment_loss_grad(&table),
            Err(Error::MissingSpans(9))
        ));
    }

    #[test]
    fn total_loss_sums_five_terms() {
        let zero = TotalLossInputs {
            l_box: 0.0,
            l_cls: 0.0,
            l_mask: 0.0,
            l_align: 0.0,
            l_gnn: 0.0,
        };
        assert_eq!(total_loss(&zero).unwrap(), 0.0);

        let inputs = TotalLossInputs {
            l_box: 1.0,
            l_cls: 2.0,
            l_mask: 3.0,
            l_align: 5.0,
            l_gnn: 4.0,
        };
        assert_eq!(total_loss(&inputs).unwrap(), 15.0);
    }

    #[test]
    fn total_loss_composes_with_alignment_loss() {
        let l_align = alignment_loss(&three_cell_row()).unwrap().total;
        let inputs = TotalLossInputs {
            l_box: 0.0,
            l_cls: 0.0,
            l_mask: 0.0,
            l_align,
            l_gnn: 0.0,
        };
        assert_eq!(total_loss(&inputs).unwrap(), 8.0);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let inputs = TotalLossInputs {
            l_box: f64::NAN,
            l_cls: 0.0,
            l_mask: 0.0,
            l_align: 0.0,
            l_gnn: 0.0,
        };
        assert!(matches!(total_loss(&inputs), Err(Error::NonFinite)));
        let inputs = TotalLossInputs {
            l_box: 0.0,
            l_cls: f64::INFINITY,
            l_mask: 0.0,
            l_align: 0.0,
            l_gnn: 0.0,
        };
        assert!(matches!(total_loss(&inputs), Err(Error::NonFinite)));
    }
}
