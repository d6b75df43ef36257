//! Ordered labeled trees, exact tree edit distance, and the TEDS similarity.
//!
//! The edit distance is the classical ordered-tree dynamic program over
//! keyroots and forest decompositions (Zhang–Shasha), with unit insert and
//! delete costs and a relabel cost of 0 for equal labels and 1 otherwise.
//! TEDS normalizes it to a similarity: `1 - dist / max(|a|, |b|)`, which
//! lands in [0, 1] because deleting one tree and inserting the other bounds
//! the distance by the larger size.

use crate::error::{Error, Result};
use crate::model::TableAnnotation;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode<L> {
    pub label: L,
    pub children: Vec<usize>,
}

/// Arena-backed ordered tree. Node 0, when present, is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree<L> {
    nodes: Vec<TreeNode<L>>,
}

impl<L> Default for Tree<L> {
    fn default() -> Self {
        Tree { nodes: Vec::new() }
    }
}

impl<L> Tree<L> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node and attaches it to `parent`; the first node added is the
    /// root and must be the only one without a parent.
    pub fn add_node(&mut self, parent: Option<usize>, label: L) -> usize {
        debug_assert_eq!(parent.is_none(), self.nodes.is_empty());
        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            label,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(idx);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: usize) -> &TreeNode<L> {
        &self.nodes[idx]
    }

    /// Node indices in postorder starting from the root.
    fn postorder(&self) -> Vec<usize> {
        fn walk<L>(tree: &Tree<L>, node: usize, out: &mut Vec<usize>) {
            for &child in &tree.nodes[node].children {
                walk(tree, child, out);
            }
            out.push(node);
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        if !self.nodes.is_empty() {
            walk(self, 0, &mut out);
        }
        out
    }
}

/// Label of a structure-tree node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeLabel {
    Root,
    Row,
    Cell {
        rowspan: usize,
        colspan: usize,
        content: Option<String>,
    },
}

pub type StructTree = Tree<NodeLabel>;

/// Builds the structure tree: a root, one row node per row index, and each
/// cell attached once under its start row ordered by start column. Content is
/// carried in the cell labels when `include_content` is set.
pub fn table_to_tree(table: &TableAnnotation, include_content: bool) -> Result<StructTree> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let mut tree = StructTree::new();
    let root = tree.add_node(None, NodeLabel::Root);
    for r in 0..table.n_rows() {
        let row = tree.add_node(Some(root), NodeLabel::Row);
        let mut in_row: Vec<_> = table
            .cells
            .iter()
            .filter(|c| c.spans.unwrap().sr == r)
            .collect();
        in_row.sort_by_key(|c| (c.spans.unwrap().sc, c.id));
        for cell in in_row {
            let s = cell.spans.unwrap();
            tree.add_node(
                Some(row),
                NodeLabel::Cell {
                    rowspan: s.row_span(),
                    colspan: s.col_span(),
                    content: include_content.then(|| cell.content.clone()),
                },
            );
        }
    }
    Ok(tree)
}

/// Per-tree tables for the edit-distance DP: labels in postorder and each
/// postorder position's leftmost leaf.
struct PostorderView<'a, L> {
    labels: Vec<&'a L>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a, L> PostorderView<'a, L> {
    fn build(tree: &'a Tree<L>) -> Self {
        let order = tree.postorder();
        let n = order.len();
        let mut position = vec![0usize; n];
        for (pos, &node) in order.iter().enumerate() {
            position[node] = pos;
        }
        let mut leftmost = vec![0usize; n];
        for (pos, &node) in order.iter().enumerate() {
            let mut cursor = node;
            while let Some(&first) = tree.nodes[cursor].children.first() {
                cursor = first;
            }
            leftmost[pos] = position[cursor];
        }
        // A keyroot is the highest postorder position among nodes sharing a
        // leftmost leaf.
        let mut keyroots = Vec::new();
        for pos in 0..n {
            if !(pos + 1..n).any(|later| leftmost[later] == leftmost[pos]) {
                keyroots.push(pos);
            }
        }
        let labels = order.iter().map(|&node| &tree.nodes[node].label).collect();
        PostorderView {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Exact ordered-tree edit distance with unit insert/delete costs and binary
/// relabel cost.
#[allow(clippy::needless_range_loop)] // index arithmetic mirrors the DP recurrences
pub fn tree_edit_distance<L: Eq>(a: &Tree<L>, b: &Tree<L>) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len() + b.len();
    }
    let va = PostorderView::build(a);
    let vb = PostorderView::build(b);
    let (na, nb) = (va.labels.len(), vb.labels.len());
    let mut tree_dist = vec![vec![0usize; nb]; na];

    for &x in &va.keyroots {
        let lx = va.leftmost[x];
        for &y in &vb.keyroots {
            let ly = vb.leftmost[y];
            // Forest distance over postorder slices lx..=x and ly..=y, with
            // row/col 0 for the empty forest.
            let (rows, cols) = (x - lx + 2, y - ly + 2);
            let mut fd = vec![vec![0usize; cols]; rows];
            for di in 1..rows {
                fd[di][0] = fd[di - 1][0] + 1;
            }
            for dj in 1..cols {
                fd[0][dj] = fd[0][dj - 1] + 1;
            }
            for i in lx..=x {
                let di = i - lx + 1;
                for j in ly..=y {
                    let dj = j - ly + 1;
                    if va.leftmost[i] == lx && vb.leftmost[j] == ly {
                        let relabel = usize::from(va.labels[i] != vb.labels[j]);
                        fd[di][dj] = (fd[di - 1][dj] + 1)
                            .min(fd[di][dj - 1] + 1)
                            .min(fd[di - 1][dj - 1] + relabel);
                        tree_dist[i][j] = fd[di][dj];
                    } else {
                        let (pi, pj) = (va.leftmost[i] - lx, vb.leftmost[j] - ly);
                        fd[di][dj] = (fd[di - 1][dj] + 1)
                            .min(fd[di][dj - 1] + 1)
                            .min(fd[pi][pj] + tree_dist[i][j]);
                    }
                }
            }
        }
    }
    tree_dist[na - 1][nb - 1]
}

/// Tree-edit-distance similarity in [0, 1]; errors on empty trees.
///
/// For wildly dissimilar shapes the raw distance can exceed the larger tree
/// size (sibling/ancestor order constraints may force more than `max` edits),
/// so the normalized value is clamped at 0 to keep the advertised range.
pub fn teds<L: Eq>(a: &Tree<L>, b: &Tree<L>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTree);
    }
    let dist = tree_edit_distance(a, b);
    Ok((1.0 - dist as f64 / a.len().max(b.len()) as f64).max(0.0))
}
