//! Markup serialization of logical table structure and BLEU scoring over
//! token sequences.
//!
//! The token vocabulary is fixed by this toolkit so predictions and ground
//! truth are always compared in the same alphabet: `<tr>` opens a row,
//! `</tr>` closes it, and each cell is a single `<td>` token carrying
//! `rowspan`/`colspan` attributes when they exceed 1, e.g.
//! `<td rowspan="2" colspan="3">`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::model::TableAnnotation;

/// One structural token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkupToken {
    RowOpen,
    RowClose,
    Cell { rowspan: usize, colspan: usize },
}

impl fmt::Display for MarkupToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MarkupToken::RowOpen => write!(f, "<tr>"),
            MarkupToken::RowClose => write!(f, "</tr>"),
            MarkupToken::Cell { rowspan, colspan } => {
                write!(f, "<td")?;
                if rowspan != 1 {
                    write!(f, " rowspan=\"{rowspan}\"")?;
                }
                if colspan != 1 {
                    write!(f, " colspan=\"{colspan}\"")?;
                }
                write!(f, ">")
            }
        }
    }
}

/// Ordered token sequence describing a table's logical structure.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MarkupSeq {
    tokens: Vec<MarkupToken>,
}

impl MarkupSeq {
    pub fn new(tokens: Vec<MarkupToken>) -> Self {
        MarkupSeq { tokens }
    }

    pub fn tokens(&self) -> &[MarkupToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// True when row-open/row-close tokens nest properly and every cell sits
    /// inside a row.
    pub fn is_balanced(&self) -> bool {
        let mut depth = 0i32;
        for tok in &self.tokens {
            match tok {
                MarkupToken::RowOpen => depth += 1,
                MarkupToken::RowClose => {
                    depth -= 1;
                    if depth < 0 {
                        return false;
                    }
                }
                MarkupToken::Cell { .. } => {
                    if depth == 0 {
                        return false;
                    }
                }
            }
        }
        depth == 0
    }
}

impl fmt::Display for MarkupSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{tok}")?;
        }
        Ok(())
    }
}

/// Serializes a table's logical structure.
///
/// Rows are enumerated from 0 to the maximum end row; each cell is emitted
/// once, in its start row, ordered by start column. A table with no cells
/// yields an empty sequence.
pub fn to_markup(table: &TableAnnotation) -> Result<MarkupSeq> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let mut tokens = Vec::new();
    for r in 0..table.n_rows() {
        tokens.push(MarkupToken::RowOpen);
        let mut in_row: Vec<_> = table
            .cells
            .iter()
            .filter(|c| c.spans.unwrap().sr == r)
            .collect();
        in_row.sort_by_key(|c| (c.spans.unwrap().sc, c.id));
        for cell in in_row {
            let s = cell.spans.unwrap();
            tokens.push(MarkupToken::Cell {
                rowspan: s.row_span(),
                colspan: s.col_span(),
            });
        }
        tokens.push(MarkupToken::RowClose);
    }
    Ok(MarkupSeq::new(tokens))
}

/// BLEU over markup sequences; see [`bleu_tokens`].
pub fn bleu(candidate: &MarkupSeq, reference: &MarkupSeq, max_n: usize) -> Result<f64> {
    bleu_tokens(candidate.tokens(), reference.tokens(), max_n)
}

/// Textbook BLEU: the geometric mean of modified n-gram precisions for
/// n = 1..min(max_n, candidate length), times the brevity penalty
/// `exp(1 - ref_len / cand_len)` when the candidate is shorter than the
/// reference. No smoothing is applied; a zero precision at any used order
/// makes the score 0, as does an empty candidate.
pub fn bleu_tokens<T: Eq + Hash>(candidate: &[T], reference: &[T], max_n: usize) -> Result<f64> {
    if max_n == 0 {
        return Err(Error::InvalidParams("max_n must be at least 1".into()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }

    let top = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=top {
        let mut ref_counts: HashMap<&[T], usize> = HashMap::new();
        for gram in reference.windows(n) {
            *ref_counts.entry(gram).or_insert(0) += 1;
        }
        let mut cand_counts: HashMap<&[T], usize> = HashMap::new();
        for gram in candidate.windows(n) {
            *cand_counts.entry(gram).or_insert(0) += 1;
        }
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        let total = candidate.len() - n + 1;
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let precision_mean = (log_sum / top as f64).exp();

    let brevity = if candidate.len() < reference.len() {
        (1.0 - reference.len() as f64 / candidate.len() as f64).exp()
    } else {
        1.0
    };
    Ok(brevity * precision_mean)
}

/// Document-level aggregation for BLEU and TEDS: the plain mean of per-table
/// scores. Empty input scores 0.
pub fn document_average(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}
