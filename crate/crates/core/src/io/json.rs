//! Canonical cell JSON format.
//!
//! A versioned document with the cell list and, optionally, the row/column
//! adjacency matrices as nested 0/1 arrays:
//!
//! ```json
//! {
//!   "version": 1,
//!   "cells": [
//!     { "id": 0, "x1": 0.0, "y1": 0.0, "x2": 60.0, "y2": 30.0,
//!       "content": "c0", "empty": false, "sr": 0, "er": 0, "sc": 0, "ec": 0 }
//!   ],
//!   "row_adjacency": [[1]],
//!   "col_adjacency": [[1]]
//! }
//! ```
//!
//! Span fields are all present or all absent per cell; the `empty` flag must
//! agree with the content; unknown fields are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdjacencyMatrices, BBox, BinaryMatrix, CellBox, SpanIndices, TableAnnotation};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalTableFile {
    pub version: u32,
    pub cells: Vec<CellRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_adjacency: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_adjacency: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub id: u32,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub content: String,
    pub empty: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub er: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ec: Option<usize>,
}

/// Builds the file representation of a table and optional matrices.
pub fn to_file(
    table: &TableAnnotation,
    adjacency: Option<&AdjacencyMatrices>,
) -> CanonicalTableFile {
    let cells = table
        .cells
        .iter()
        .map(|c| CellRecord {
            id: c.id,
            x1: c.bbox.x1,
            y1: c.bbox.y1,
            x2: c.bbox.x2,
            y2: c.bbox.y2,
            content: c.content.clone(),
            empty: c.is_empty(),
            sr: c.spans.map(|s| s.sr),
            er: c.spans.map(|s| s.er),
            sc: c.spans.map(|s| s.sc),
            ec: c.spans.map(|s| s.ec),
        })
        .collect();
    CanonicalTableFile {
        version: FORMAT_VERSION,
        cells,
        row_adjacency: adjacency.map(|a| a.row().to_rows()),
        col_adjacency: adjacency.map(|a| a.col().to_rows()),
    }
}

/// Validates a parsed file and converts it back to model types.
pub fn from_file(
    file: &CanonicalTableFile,
) -> Result<(TableAnnotation, Option<AdjacencyMatrices>)> {
    if file.version != FORMAT_VERSION {
        return Err(Error::parse(
            "version",
            format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                file.version
            ),
        ));
    }
    let mut cells = Vec::with_capacity(file.cells.len());
    for rec in &file.cells {
        let spans = match (rec.sr, rec.er, rec.sc, rec.ec) {
            (Some(sr), Some(er), Some(sc), Some(ec)) => Some(SpanIndices::new(sr, er, sc, ec)),
            (None, None, None, None) => None,
            _ => {
                return Err(Error::parse(
                    format!("cell {}", rec.id),
                    "sr/er/sc/ec must be given together or not at all",
                ))
            }
        };
        let cell = CellBox {
            id: rec.id,
            bbox: BBox::new(rec.x1, rec.y1, rec.x2, rec.y2),
            spans,
            content: rec.content.clone(),
        };
        if rec.empty != cell.is_empty() {
            return Err(Error::InvariantViolation(format!(
                "cell {}: empty flag is {} but content {:?} says otherwise",
                rec.id, rec.empty, rec.content
            )));
        }
        cells.push(cell);
    }
    let table = TableAnnotation::new(cells);

    let adjacency = match (&file.row_adjacency, &file.col_adjacency) {
        (Some(row), Some(col)) => {
            let row = BinaryMatrix::from_rows(row).map_err(|m| Error::parse("row_adjacency", m))?;
            let col = BinaryMatrix::from_rows(col).map_err(|m| Error::parse("col_adjacency", m))?;
            if row.n() != table.n_cells() {
                return Err(Error::DimensionMismatch {
                    expected: table.n_cells(),
                    got: row.n(),
                });
            }
            if col.n() != table.n_cells() {
                return Err(Error::DimensionMismatch {
                    expected: table.n_cells(),
                    got: col.n(),
                });
            }
            Some(AdjacencyMatrices::new(row, col)?)
        }
        (None, None) => None,
        _ => {
            return Err(Error::parse(
                "adjacency",
                "row_adjacency and col_adjacency must be given together",
            ))
        }
    };
    Ok((table, adjacency))
}

/// Serializes to the canonical JSON text (pretty-printed, trailing newline).
pub fn json_string(table: &TableAnnotation, adjacency: Option<&AdjacencyMatrices>) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(table, adjacency))
        .expect("table serialization cannot fail");
    text.push('\n');
    text
}

pub fn write_json(
    path: impl AsRef<Path>,
    table: &TableAnnotation,
    adjacency: Option<&AdjacencyMatrices>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, json_string(table, adjacency)).map_err(|e| Error::io(path, e))
}

pub fn parse_json(
    text: &str,
    origin: &str,
) -> Result<(TableAnnotation, Option<AdjacencyMatrices>)> {
    let file: CanonicalTableFile = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("{origin}:{}:{}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    from_file(&file)
}

pub fn read_json(path: impl AsRef<Path>) -> Result<(TableAnnotation, Option<AdjacencyMatrices>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}
