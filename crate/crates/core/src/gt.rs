//! Ground-truth preparation: turning content-level boxes into aligned
//! cell-level boxes, and assembling cells from word boxes.
//!
//! Datasets annotated at the content level give each cell the smallest box
//! around its text, so cells of the same row do not share edges. The alignment
//! loss assumes they do. [`unify_boxes`] snaps every start edge to the group
//! minimum and every end edge to the group maximum, which is the smallest
//! expansion-only change after which the alignment loss is exactly zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{validate_table, BBox, CellBox, CellId, TableAnnotation};

/// Expands content-level boxes into aligned cell-level boxes.
///
/// For every row index `r`, all cells starting at `r` receive the group's
/// minimum `y1` and all cells ending at `r` the group's maximum `y2`;
/// analogously `x1`/`x2` per start/end column. Content and spans are
/// unchanged. The result is a fixed point: unifying twice equals unifying
/// once, and every output box contains its input box.
pub fn unify_boxes(table: &TableAnnotation) -> Result<TableAnnotation> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let violations = validate_table(table);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidTable(list.join("; ")));
    }

    let mut y1_of_sr: BTreeMap<usize, f64> = BTreeMap::new();
    let mut y2_of_er: BTreeMap<usize, f64> = BTreeMap::new();
    let mut x1_of_sc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut x2_of_ec: BTreeMap<usize, f64> = BTreeMap::new();
    for cell in &table.cells {
        let s = cell.spans.unwrap();
        let b = &cell.bbox;
        y1_of_sr
            .entry(s.sr)
            .and_modify(|v| *v = v.min(b.y1))
            .or_insert(b.y1);
        y2_of_er
            .entry(s.er)
            .and_modify(|v| *v = v.max(b.y2))
            .or_insert(b.y2);
        x1_of_sc
            .entry(s.sc)
            .and_modify(|v| *v = v.min(b.x1))
            .or_insert(b.x1);
        x2_of_ec
            .entry(s.ec)
            .and_modify(|v| *v = v.max(b.x2))
            .or_insert(b.x2);
    }

    let cells = table
        .cells
        .iter()
        .map(|cell| {
            let s = cell.spans.unwrap();
            let bbox = BBox::new(
                x1_of_sc[&s.sc],
                y1_of_sr[&s.sr],
                x2_of_ec[&s.ec],
                y2_of_er[&s.er],
            );
            CellBox {
                bbox,
                ..cell.clone()
            }
        })
        .collect();
    Ok(TableAnnotation::new(cells))
}

/// Builds content-level cells from word boxes and a word-to-cell assignment.
///
/// `assignment[i]` names the cell that owns `words[i]`. Each produced cell
/// gets the minimal box covering its words; its content is the words' text
/// joined by single spaces in reading order (line bands top to bottom, left
/// to right within a band). Cells that own no words are not produced; cells
/// appear in ascending id order without spans.
pub fn words_to_cells(words: &[(BBox, String)], assignment: &[CellId]) -> Result<TableAnnotation> {
    if words.is_empty() {
        return Err(Error::EmptyInput);
    }
    if words.len() != assignment.len() {
        return Err(Error::InvalidParams(format!(
            "{} words but {} assignments",
            words.len(),
            assignment.len()
        )));
    }

    let mut by_cell: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
    for (word_idx, &cell_id) in assignment.iter().enumerate() {
        by_cell.entry(cell_id).or_default().push(word_idx);
    }

    let mut cells = Vec::with_capacity(by_cell.len());
    for (cell_id, mut word_indices) in by_cell {
        word_indices.sort_by(|&a, &b| {
            let (wa, wb) = (&words[a].0, &words[b].0);
            wa.y1
                .total_cmp(&wb.y1)
                .then(wa.x1.total_cmp(&wb.x1))
                .then(a.cmp(&b))
        });

        // Group into line bands: a word joins the current band while its
        // vertical extent still intersects the band's running extent.
        let mut bands: Vec<(f64, f64, Vec<usize>)> = Vec::new();
        for idx in word_indices {
            let w = &words[idx].0;
            match bands.last_mut() {
                Some((top, bottom, members)) if w.y1 < *bottom && w.y2 > *top => {
                    *top = top.min(w.y1);
                    *bottom = bottom.max(w.y2);
                    members.push(idx);
                }
                _ => bands.push((w.y1, w.y2, vec![idx])),
            }
        }

        let mut ordered = Vec::new();
        for (_, _, mut members) in bands {
            members.sort_by(|&a, &b| words[a].0.x1.total_cmp(&words[b].0.x1).then(a.cmp(&b)));
            ordered.extend(members);
        }

        let bbox = ordered
            .iter()
            .map(|&i| words[i].0)
            .reduce(|a, b| a.cover(&b))
            .unwrap();
        let content = ordered
            .iter()
            .map(|&i| words[i].1.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        cells.push(CellBox::new(cell_id, bbox, content));
    }
    Ok(TableAnnotation::new(cells))
}
