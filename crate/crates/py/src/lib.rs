//! Python bindings for the table structure recognition toolkit.
//!
//! Exposes the table model plus the main operations: synthetic generation,
//! ground-truth unification, alignment loss and gradients, adjacency
//! conversions, relation/TEDS/BLEU scoring, pair sampling and file I/O.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tsr_core::error::Error;
use tsr_core::eval;
use tsr_core::gt;
use tsr_core::io;
use tsr_core::loss;
use tsr_core::markup;
use tsr_core::model::{AdjacencyMatrices, BBox, BinaryMatrix, CellBox, TableAnnotation};
use tsr_core::structure;
use tsr_core::synth;
use tsr_core::tree;

type MatrixRows = Vec<Vec<u8>>;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn prf_dict(py: Python<'_>, prf: &eval::Prf) -> PyResult<Py<PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("precision", prf.precision)?;
    dict.set_item("recall", prf.recall)?;
    dict.set_item("f1", prf.f1)?;
    dict.set_item("tp", prf.true_pos)?;
    dict.set_item("fp", prf.false_pos)?;
    dict.set_item("fn", prf.false_neg)?;
    Ok(dict.into())
}

/// One table cell.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Cell {
    #[pyo3(get)]
    id: u32,
    #[pyo3(get)]
    bbox: (f64, f64, f64, f64),
    #[pyo3(get)]
    content: String,
    #[pyo3(get)]
    empty: bool,
    /// (start_row, end_row, start_col, end_col), or None when unassigned.
    #[pyo3(get)]
    spans: Option<(usize, usize, usize, usize)>,
}

impl From<&CellBox> for Cell {
    fn from(cell: &CellBox) -> Self {
        Cell {
            id: cell.id,
            bbox: (cell.bbox.x1, cell.bbox.y1, cell.bbox.x2, cell.bbox.y2),
            content: cell.content.clone(),
            empty: cell.is_empty(),
            spans: cell.spans.map(|s| (s.sr, s.er, s.sc, s.ec)),
        }
    }
}

#[pymethods]
impl Cell {
    fn __repr__(&self) -> String {
        format!(
            "Cell(id={}, bbox={:?}, spans={:?}, empty={})",
            self.id, self.bbox, self.spans, self.empty
        )
    }
}

/// An annotated table.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Table {
    inner: TableAnnotation,
}

#[pymethods]
impl Table {
    /// Deterministic synthetic table; same arguments always give the same
    /// table.
    #[staticmethod]
    #[pyo3(signature = (seed, rows, cols, merge_prob=0.0, empty_prob=0.0, jitter=0.0))]
    fn generate(
        seed: u64,
        rows: usize,
        cols: usize,
        merge_prob: f64,
        empty_prob: f64,
        jitter: f64,
    ) -> PyResult<Table> {
        let inner =
            synth::generate(seed, rows, cols, merge_prob, empty_prob, jitter).map_err(to_py_err)?;
        Ok(Table { inner })
    }

    /// Loads a `.json` (canonical cells) or `.xml` table file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Table> {
        let inner = if path.to_ascii_lowercase().ends_with(".json") {
            io::read_json(path).map_err(to_py_err)?.0
        } else {
            io::read_xml(path).map_err(to_py_err)?
        };
        Ok(Table { inner })
    }

    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    fn cells(&self) -> Vec<Cell> {
        self.inner.cells.iter().map(Cell::from).collect()
    }

    /// Invariant violations as human-readable strings; empty means valid.
    fn validate(&self) -> Vec<String> {
        tsr_core::model::validate_table(&self.inner)
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    /// Content-level to cell-level box alignment.
    fn unify(&self) -> PyResult<Table> {
        Ok(Table {
            inner: gt::unify_boxes(&self.inner).map_err(to_py_err)?,
        })
    }

    /// Alignment loss terms `(l1, l2, l3, l4, total)`.
    fn alignment_loss(&self) -> PyResult<(f64, f64, f64, f64, f64)> {
        let b = loss::alignment_loss(&self.inner).map_err(to_py_err)?;
        Ok((b.l1, b.l2, b.l3, b.l4, b.total))
    }

    /// Per-cell gradients `(d_x1, d_y1, d_x2, d_y2)` in cell order.
    fn alignment_loss_grad(&self) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let grads = loss::alignment_loss_grad(&self.inner).map_err(to_py_err)?;
        Ok(grads.iter().map(|g| (g.x1, g.y1, g.x2, g.y2)).collect())
    }

    /// Row and column adjacency matrices as nested 0/1 lists.
    fn adjacency(&self) -> PyResult<(MatrixRows, MatrixRows)> {
        let adj = structure::spans_to_adjacency(&self.inner).map_err(to_py_err)?;
        Ok((adj.row().to_rows(), adj.col().to_rows()))
    }

    /// Markup tokens of the logical structure.
    fn markup(&self) -> PyResult<Vec<String>> {
        let seq = markup::to_markup(&self.inner).map_err(to_py_err)?;
        Ok(seq.tokens().iter().map(|t| t.to_string()).collect())
    }

    /// Simulated detector output: drops and perturbs cells, strips spans.
    fn corrupt(&self, seed: u64, drop_prob: f64, shift: f64) -> Table {
        Table {
            inner: synth::corrupt(&self.inner, seed, drop_prob, shift),
        }
    }

    fn to_xml_string(&self) -> PyResult<String> {
        io::xml_string(&self.inner).map_err(to_py_err)
    }

    #[pyo3(signature = (path, include_adjacency=false))]
    fn write_json(&self, path: &str, include_adjacency: bool) -> PyResult<()> {
        let adjacency = if include_adjacency {
            Some(structure::spans_to_adjacency(&self.inner).map_err(to_py_err)?)
        } else {
            None
        };
        io::write_json(path, &self.inner, adjacency.as_ref()).map_err(to_py_err)
    }

    fn write_xml(&self, path: &str) -> PyResult<()> {
        io::write_xml(path, &self.inner).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.n_cells()
    }

    fn __repr__(&self) -> String {
        format!(
            "Table(cells={}, rows={}, cols={})",
            self.inner.n_cells(),
            self.inner.n_rows(),
            self.inner.n_cols()
        )
    }
}

fn matrices_from_lists(row: MatrixRows, col: MatrixRows) -> PyResult<AdjacencyMatrices> {
    let row = BinaryMatrix::from_rows(&row).map_err(PyValueError::new_err)?;
    let col = BinaryMatrix::from_rows(&col).map_err(PyValueError::new_err)?;
    AdjacencyMatrices::new(row, col).map_err(to_py_err)
}

/// Recovers span indices from boxes plus predicted adjacency matrices.
#[pyfunction]
fn postprocess(table: &Table, row: MatrixRows, col: MatrixRows) -> PyResult<Table> {
    let adj = matrices_from_lists(row, col)?;
    let bare: Vec<CellBox> = table
        .inner
        .cells
        .iter()
        .map(|c| CellBox {
            spans: None,
            ..c.clone()
        })
        .collect();
    let inner = structure::adjacency_to_spans(&bare, &adj).map_err(to_py_err)?;
    Ok(Table { inner })
}

/// Intersection over union of two `(x1, y1, x2, y2)` boxes.
#[pyfunction]
fn iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    eval::iou(
        &BBox::new(a.0, a.1, a.2, a.3),
        &BBox::new(b.0, b.1, b.2, b.3),
    )
}

/// Relation-level precision/recall/F1 at an IoU threshold, as a dict with
/// `precision`, `recall`, `f1`, `tp`, `fp`, `fn` keys.
#[pyfunction]
#[pyo3(signature = (pred, gt, threshold=0.6))]
fn relation_f1(py: Python<'_>, pred: &Table, gt: &Table, threshold: f64) -> PyResult<Py<PyDict>> {
    let prf = eval::relation_f1(&pred.inner, &gt.inner, threshold).map_err(to_py_err)?;
    prf_dict(py, &prf)
}

/// Cell-detection precision/recall/F1 at an IoU threshold.
#[pyfunction]
#[pyo3(signature = (pred, gt, threshold=0.6))]
fn cell_f1(py: Python<'_>, pred: &Table, gt: &Table, threshold: f64) -> PyResult<Py<PyDict>> {
    let prf = eval::cell_detection_prf(&pred.inner, &gt.inner, threshold);
    prf_dict(py, &prf)
}

/// BLEU between the markup token sequences of two tables.
#[pyfunction]
#[pyo3(signature = (pred, gt, max_n=4))]
fn bleu(pred: &Table, gt: &Table, max_n: usize) -> PyResult<f64> {
    let p = markup::to_markup(&pred.inner).map_err(to_py_err)?;
    let g = markup::to_markup(&gt.inner).map_err(to_py_err)?;
    markup::bleu(&p, &g, max_n).map_err(to_py_err)
}

/// TEDS between the structure trees of two tables.
#[pyfunction]
#[pyo3(signature = (pred, gt, include_content=false))]
fn teds(pred: &Table, gt: &Table, include_content: bool) -> PyResult<f64> {
    let a = tree::table_to_tree(&pred.inner, include_content).map_err(to_py_err)?;
    let b = tree::table_to_tree(&gt.inner, include_content).map_err(to_py_err)?;
    tree::teds(&a, &b).map_err(to_py_err)
}

/// Class-balanced pair sample `(i, j, row_label, col_label)` from a table's
/// adjacency matrices; deterministic for a fixed seed.
#[pyfunction]
fn sample_pairs(table: &Table, k: usize, seed: u64) -> PyResult<Vec<(usize, usize, bool, bool)>> {
    let adj = structure::spans_to_adjacency(&table.inner).map_err(to_py_err)?;
    let pairs = structure::sample_pairs(&adj, k, seed).map_err(to_py_err)?;
    Ok(pairs
        .iter()
        .map(|p| (p.i, p.j, p.row_label, p.col_label))
        .collect())
}

/// Five-term training loss `l_box + l_cls + l_mask + w * l_align + l_gnn`.
#[pyfunction]
#[pyo3(signature = (l_box, l_cls, l_mask, l_align, l_gnn, align_weight=1.0))]
fn total_loss(
    l_box: f64,
    l_cls: f64,
    l_mask: f64,
    l_align: f64,
    l_gnn: f64,
    align_weight: f64,
) -> PyResult<f64> {
    let inputs = loss::TotalLossInputs {
        l_box,
        l_cls,
        l_mask,
        l_align,
        l_gnn,
    };
    loss::total_loss_weighted(&inputs, align_weight).map_err(to_py_err)
}

#[pymodule]
fn tsr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Table>()?;
    m.add_class::<Cell>()?;
    m.add_function(wrap_pyfunction!(postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(relation_f1, m)?)?;
    m.add_function(wrap_pyfunction!(cell_f1, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(teds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss, m)?)?;
    Ok(())
}
