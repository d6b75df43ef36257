//! Physical-structure evaluation: IoU matching of predicted cells against
//! ground truth, neighbor-relation generation, and precision/recall/F1.
//!
//! Scoring follows the ICDAR-2013-style protocol: a predicted cell is a true
//! positive when its IoU with a ground-truth cell clears the threshold
//! (one-to-one, greedy by descending IoU), and structure is scored on
//! adjacency relations between a cell and its nearest non-empty horizontal
//! and vertical neighbors. Relations that involve a blank cell are never
//! generated, and blank cells take no part in the matching used for relation
//! scoring, so adding empty cells anywhere changes no relation score.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{BBox, CellId, Direction, Relation, RelationSet, TableAnnotation};

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One matched (predicted, ground-truth) cell pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub pred: CellId,
    pub gt: CellId,
    pub iou: f64,
}

/// Result of one-to-one cell matching at a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_pred: Vec<CellId>,
    pub unmatched_gt: Vec<CellId>,
    pub threshold: f64,
}

/// Greedy one-to-one matching in descending IoU order among pairs with
/// IoU >= threshold; ties broken by (pred id, gt id).
pub fn match_cells(pred: &TableAnnotation, gt: &TableAnnotation, threshold: f64) -> MatchResult {
    let mut candidates: Vec<MatchPair> = Vec::new();
    for p in &pred.cells {
        for g in &gt.cells {
            let overlap = iou(&p.bbox, &g.bbox);
            if overlap >= threshold {
                candidates.push(MatchPair {
                    pred: p.id,
                    gt: g.id,
                    iou: overlap,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.pred.cmp(&b.pred))
            .then(a.gt.cmp(&b.gt))
    });

    let mut pred_taken = BTreeMap::new();
    let mut gt_taken = BTreeMap::new();
    let mut pairs = Vec::new();
    for cand in candidates {
        if pred_taken.contains_key(&cand.pred) || gt_taken.contains_key(&cand.gt) {
            continue;
        }
        pred_taken.insert(cand.pred, ());
        gt_taken.insert(cand.gt, ());
        pairs.push(cand);
    }
    let unmatched_pred = pred
        .cells
        .iter()
        .map(|c| c.id)
        .filter(|id| !pred_taken.contains_key(id))
        .collect();
    let unmatched_gt = gt
        .cells
        .iter()
        .map(|c| c.id)
        .filter(|id| !gt_taken.contains_key(id))
        .collect();
    MatchResult {
        pairs,
        unmatched_pred,
        unmatched_gt,
        threshold,
    }
}

/// How relations are derived from spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationMode {
    /// Nearest non-empty neighbor to the right / below, per spanned row or
    /// column, deduplicated. This is the scored protocol.
    DirectNeighbor,
    /// Every unordered non-empty pair sharing a row or column, emitted from
    /// the lower id. Diagnostic only.
    AllPairs,
}

/// Direct-neighbor relations (the evaluation protocol).
pub fn generate_relations(table: &TableAnnotation) -> Result<RelationSet> {
    generate_relations_with_mode(table, RelationMode::DirectNeighbor)
}

pub fn generate_relations_with_mode(
    table: &TableAnnotation,
    mode: RelationMode,
) -> Result<RelationSet> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let mut relations = RelationSet::new();
    match mode {
        RelationMode::DirectNeighbor => {
            for cell in table.cells.iter().filter(|c| !c.is_empty()) {
                let s = cell.spans.unwrap();
                for r in s.sr..=s.er {
                    let next = table
                        .cells
                        .iter()
                        .filter(|d| !d.is_empty() && d.id != cell.id)
                        .filter(|d| {
                            let t = d.spans.unwrap();
                            t.sr <= r && r <= t.er && t.sc > s.ec
                        })
                        .min_by_key(|d| (d.spans.unwrap().sc, d.id));
                    if let Some(d) = next {
                        relations.insert(Relation {
                            from_cell: cell.id,
                            to_cell: d.id,
                            direction: Direction::Horizontal,
                        });
                    }
                }
                for c in s.sc..=s.ec {
                    let next = table
                        .cells
                        .iter()
                        .filter(|d| !d.is_empty() && d.id != cell.id)
                        .filter(|d| {
                            let t = d.spans.unwrap();
                            t.sc <= c && c <= t.ec && t.sr > s.er
                        })
                        .min_by_key(|d| (d.spans.unwrap().sr, d.id));
                    if let Some(d) = next {
                        relations.insert(Relation {
                            from_cell: cell.id,
                            to_cell: d.id,
                            direction: Direction::Vertical,
                        });
                    }
                }
            }
        }
        RelationMode::AllPairs => {
            let filled: Vec<_> = table.cells.iter().filter(|c| !c.is_empty()).collect();
            for (i, a) in filled.iter().enumerate() {
                for b in &filled[i + 1..] {
                    let (from, to) = if a.id <= b.id {
                        (a.id, b.id)
                    } else {
                        (b.id, a.id)
                    };
                    let (sa, sb) = (a.spans.unwrap(), b.spans.unwrap());
                    if sa.rows_overlap(&sb) {
                        relations.insert(Relation {
                            from_cell: from,
                            to_cell: to,
                            direction: Direction::Horizontal,
                        });
                    }
                    if sa.cols_overlap(&sb) {
                        relations.insert(Relation {
                            from_cell: from,
                            to_cell: to,
                            direction: Direction::Vertical,
                        });
                    }
                }
            }
        }
    }
    Ok(relations)
}

/// Precision/recall/F1 with the underlying confusion counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Prf {
    /// Builds scores from counts; empty denominators score 0.
    pub fn from_counts(true_pos: usize, false_pos: usize, false_neg: usize) -> Prf {
        let precision = if true_pos + false_pos == 0 {
            0.0
        } else {
            true_pos as f64 / (true_pos + false_pos) as f64
        };
        let recall = if true_pos + false_neg == 0 {
            0.0
        } else {
            true_pos as f64 / (true_pos + false_neg) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            true_pos,
            false_pos,
            false_neg,
        }
    }

    /// Micro-average: pools the confusion counts of many tables, then scores.
    pub fn micro<'a>(parts: impl IntoIterator<Item = &'a Prf>) -> Prf {
        let (mut tp, mut fp, mut fal_n) = (0, 0, 0);
        for p in parts {
            tp += p.true_pos;
            fp += p.false_pos;
            fal_n += p.false_neg;
        }
        Prf::from_counts(tp, fp, fal_n)
    }
}

/// Cell-detection scores: matched pairs are true positives, unmatched
/// predictions false positives, unmatched ground truth false negatives.
pub fn cell_detection_prf(pred: &TableAnnotation, gt: &TableAnnotation, threshold: f64) -> Prf {
    let m = match_cells(pred, gt, threshold);
    Prf::from_counts(m.pairs.len(), m.unmatched_pred.len(), m.unmatched_gt.len())
}

fn without_empty(table: &TableAnnotation) -> TableAnnotation {
    TableAnnotation::new(
        table
            .cells
            .iter()
            .filter(|c| !c.is_empty())
            .cloned()
            .collect(),
    )
}

/// Relation-level scores: predicted cells are mapped to ground-truth ids by
/// IoU matching over the non-empty cells, predicted relations are translated
/// into ground-truth id space (relations touching an unmatched cell become
/// false positives), and the translated set is compared with the ground-truth
/// relation set.
pub fn relation_f1(pred: &TableAnnotation, gt: &TableAnnotation, threshold: f64) -> Result<Prf> {
    let pred_relations = generate_relations(pred)?;
    let gt_relations = generate_relations(gt)?;

    let matching = match_cells(&without_empty(pred), &without_empty(gt), threshold);
    let to_gt: BTreeMap<CellId, CellId> = matching.pairs.iter().map(|p| (p.pred, p.gt)).collect();

    let mut tp = 0usize;
    for rel in pred_relations.iter() {
        let translated = match (to_gt.get(&rel.from_cell), to_gt.get(&rel.to_cell)) {
            (Some(&from), Some(&to)) => Relation {
                from_cell: from,
                to_cell: to,
                direction: rel.direction,
            },
            _ => continue,
        };
        if gt_relations.contains(&translated) {
            tp += 1;
        }
    }
    let fp = pred_relations.len() - tp;
    let fal_n = gt_relations.len() - tp;
    Ok(Prf::from_counts(tp, fp, fal_n))
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub cells: Prf,
    pub relations: Prf,
}

/// Cell-detection and relation scores at each threshold.
pub fn threshold_sweep(
    pred: &TableAnnotation,
    gt: &TableAnnotation,
    thresholds: &[f64],
) -> Result<Vec<SweepRow>> {
    thresholds
        .iter()
        .map(|&threshold| {
            Ok(SweepRow {
                threshold,
                cells: cell_detection_prf(pred, gt, threshold),
                relations: relation_f1(pred, gt, threshold)?,
            })
        })
        .collect()
}
