//! Oracles and helpers shared by the integration suites. Everything here is
//! deliberately independent of the library's implementation paths: distances
//! come from exhaustive search, span assignments from enumeration, and
//! derivatives from finite differences.

// Each test target compiles this module and uses a subset of it.
#![allow(dead_code)]

use std::collections::HashMap;

use tsr_core::model::{AdjacencyMatrices, BinaryMatrix, SpanIndices, TableAnnotation};
use tsr_core::rng::SplitMix64;
use tsr_core::structure::{adjacency_to_spans, spans_to_adjacency};
use tsr_core::tree::Tree;

/// Order-preserving renumbering of span indices: endpoint values are rank
/// compressed per axis, which preserves every interval intersection.
pub fn canonical_spans(spans: &[SpanIndices]) -> Vec<SpanIndices> {
    let mut row_values: Vec<usize> = spans.iter().flat_map(|s| [s.sr, s.er]).collect();
    let mut col_values: Vec<usize> = spans.iter().flat_map(|s| [s.sc, s.ec]).collect();
    row_values.sort_unstable();
    row_values.dedup();
    col_values.sort_unstable();
    col_values.dedup();
    let row_rank = |v: usize| row_values.binary_search(&v).unwrap();
    let col_rank = |v: usize| col_values.binary_search(&v).unwrap();
    spans
        .iter()
        .map(|s| {
            SpanIndices::new(
                row_rank(s.sr),
                row_rank(s.er),
                col_rank(s.sc),
                col_rank(s.ec),
            )
        })
        .collect()
}

pub fn spans_of(table: &TableAnnotation) -> Vec<SpanIndices> {
    table.cells.iter().map(|c| c.spans.unwrap()).collect()
}

/// Restricts `origin`'s adjacency matrices to the ids surviving in `pred`
/// and recovers spans for the corrupted boxes — the realistic prediction
/// pipeline for evaluation tests.
pub fn respan_against(pred: &TableAnnotation, origin: &TableAnnotation) -> TableAnnotation {
    let full = spans_to_adjacency(origin).unwrap();
    let keep: Vec<usize> = pred
        .cells
        .iter()
        .map(|c| origin.cells.iter().position(|o| o.id == c.id).unwrap())
        .collect();
    let n = keep.len();
    let mut row = BinaryMatrix::new(n);
    let mut col = BinaryMatrix::new(n);
    for a in 0..n {
        for b in 0..n {
            row.set(a, b, full.row().get(keep[a], keep[b]));
            col.set(a, b, full.col().get(keep[a], keep[b]));
        }
    }
    let adj = AdjacencyMatrices::new(row, col).unwrap();
    adjacency_to_spans(&pred.cells, &adj).unwrap()
}

/// All interval assignments over one axis that reproduce `matrix` as their
/// intersection pattern, found by iterative deepening on the number of grid
/// lines: the first depth with solutions is the minimal one, and only
/// assignments in which every grid line is witnessed by some interval
/// endpoint are kept (anything else compresses to fewer lines).
pub fn minimal_interval_assignments(matrix: &BinaryMatrix) -> Vec<Vec<(usize, usize)>> {
    let n = matrix.n();
    if n == 0 {
        return vec![Vec::new()];
    }
    for depth in 1..=(2 * n) {
        let mut solutions = Vec::new();
        let mut partial: Vec<(usize, usize)> = Vec::with_capacity(n);
        search_intervals(matrix, depth, &mut partial, &mut solutions);
        if !solutions.is_empty() {
            return solutions;
        }
    }
    Vec::new()
}

fn search_intervals(
    matrix: &BinaryMatrix,
    depth: usize,
    partial: &mut Vec<(usize, usize)>,
    solutions: &mut Vec<Vec<(usize, usize)>>,
) {
    let n = matrix.n();
    let cell = partial.len();
    if cell == n {
        let mut witnessed = vec![false; depth];
        for &(a, b) in partial.iter() {
            witnessed[a] = true;
            witnessed[b] = true;
        }
        if witnessed.into_iter().all(|w| w) {
            solutions.push(partial.clone());
        }
        return;
    }
    for a in 0..depth {
        for b in a..depth {
            let ok = partial.iter().enumerate().all(|(other, &(c, d))| {
                let intersects = a <= d && c <= b;
                intersects == matrix.get(cell, other)
            });
            if ok {
                partial.push((a, b));
                search_intervals(matrix, depth, partial, solutions);
                partial.pop();
            }
        }
    }
}

/// A forest as a list of (label, children) trees in left-to-right order.
#[derive(Clone, PartialEq, Eq)]
pub struct Forest(pub Vec<(u8, Forest)>);

impl Forest {
    pub fn size(&self) -> u32 {
        self.0.iter().map(|(_, kids)| 1 + kids.size()).sum()
    }

    /// Preorder bit encoding: for each node an open bit (1), its label bit,
    /// then children, then a close bit (0). Six nodes fit in 19 bits.
    fn encode(&self) -> u64 {
        fn push(bits: &mut u64, len: &mut u32, bit: u64) {
            *bits |= bit << *len;
            *len += 1;
        }
        fn walk(f: &Forest, bits: &mut u64, len: &mut u32) {
            for (label, kids) in &f.0 {
                push(bits, len, 1);
                push(bits, len, u64::from(*label));
                walk(kids, bits, len);
                push(bits, len, 0);
            }
        }
        let (mut bits, mut len) = (1u64, 1u32); // leading 1 guards length
        walk(self, &mut bits, &mut len);
        bits
    }
}

/// Exhaustive edit-script oracle for the ordered-forest edit distance with
/// unit costs: every forest with up to `max_nodes` nodes over a two-symbol
/// alphabet is interned, and the full distance table over all forest pairs
/// is tabulated from the raw delete/insert/match recursion — no keyroot or
/// postorder machinery is involved.
pub struct NaiveTed {
    ids: HashMap<u64, u32>,
    /// Per forest: (size, splice-of-first-root id, children-of-first-root
    /// id, rest id, first-root label); the empty forest has no entry fields.
    facts: Vec<(u32, u32, u32, u32, u8)>,
    table: Vec<u8>,
}

impl NaiveTed {
    pub fn new(max_nodes: usize) -> Self {
        // Forests with n nodes split uniquely as first tree of k nodes plus
        // a rest forest of n - k, so this enumeration has no duplicates.
        fn forests_with(n: usize, memo: &mut Vec<Option<Vec<Forest>>>) -> Vec<Forest> {
            if let Some(hit) = &memo[n] {
                return hit.clone();
            }
            let mut out = Vec::new();
            if n == 0 {
                out.push(Forest(Vec::new()));
            } else {
                for k in 1..=n {
                    for label in 0u8..2 {
                        for kids in forests_with(k - 1, memo) {
                            for rest in forests_with(n - k, memo) {
                                let mut trees = vec![(label, kids.clone())];
                                trees.extend(rest.0.clone());
                                out.push(Forest(trees));
                            }
                        }
                    }
                }
            }
            memo[n] = Some(out.clone());
            out
        }

        let mut by_size = Vec::new();
        let mut memo = vec![None; max_nodes + 1];
        for n in 0..=max_nodes {
            by_size.push(forests_with(n, &mut memo));
        }
        let all: Vec<Forest> = by_size.into_iter().flatten().collect();

        let mut ids = HashMap::with_capacity(all.len());
        for (id, f) in all.iter().enumerate() {
            let prev = ids.insert(f.encode(), id as u32);
            assert!(prev.is_none(), "encoding collision");
        }

        let facts: Vec<(u32, u32, u32, u32, u8)> = all
            .iter()
            .map(|f| {
                if f.0.is_empty() {
                    return (0, 0, 0, 0, 0);
                }
                let (label, kids) = &f.0[0];
                let rest = Forest(f.0[1..].to_vec());
                let mut spliced = kids.0.clone();
                spliced.extend_from_slice(&rest.0);
                let spliced = Forest(spliced);
                (
                    f.size(),
                    ids[&spliced.encode()],
                    ids[&kids.encode()],
                    ids[&rest.encode()],
                    *label,
                )
            })
            .collect();

        // Tabulate distances in increasing size order; every dependency of a
        // pair is strictly smaller on at least one side.
        let n = all.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by_key(|&i| facts[i as usize].0);
        let mut table = vec![0u8; n * n];
        for &a in &order {
            let fa = facts[a as usize];
            for &b in &order {
                let fb = facts[b as usize];
                let d = if fa.0 == 0 {
                    fb.0 as u8
                } else if fb.0 == 0 {
                    fa.0 as u8
                } else {
                    let delete = 1 + table[fa.1 as usize * n + b as usize];
                    let insert = 1 + table[a as usize * n + fb.1 as usize];
                    let relabel = u8::from(fa.4 != fb.4)
                        + table[fa.2 as usize * n + fb.2 as usize]
                        + table[fa.3 as usize * n + fb.3 as usize];
                    delete.min(insert).min(relabel)
                };
                table[a as usize * n + b as usize] = d;
            }
        }
        NaiveTed { ids, facts, table }
    }

    pub fn tree_distance(&self, a: &Forest, b: &Forest) -> u32 {
        let (ia, ib) = (self.ids[&a.encode()], self.ids[&b.encode()]);
        u32::from(self.table[ia as usize * self.facts.len() + ib as usize])
    }
}

/// Every ordered forest with exactly `n` nodes over labels {0, 1}.
fn forests_with(n: usize) -> Vec<Forest> {
    if n == 0 {
        return vec![Forest(Vec::new())];
    }
    let mut out = Vec::new();
    // First tree takes k nodes (1 root + k-1 children nodes), rest of the
    // forest takes n - k.
    for k in 1..=n {
        for label in 0u8..2 {
            for kids in forests_with(k - 1) {
                for rest in forests_with(n - k) {
                    let mut trees = vec![(label, kids.clone())];
                    trees.extend(rest.0.clone());
                    out.push(Forest(trees));
                }
            }
        }
    }
    out
}

/// Every ordered labeled tree with up to `max_nodes` nodes over labels {0, 1}.
pub fn all_trees_up_to(max_nodes: usize) -> Vec<Forest> {
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for label in 0u8..2 {
            for kids in forests_with(n - 1) {
                out.push(Forest(vec![(label, kids)]));
            }
        }
    }
    out
}

/// Converts an enumerated forest (which must be a single tree) into the
/// library's tree type.
pub fn to_library_tree(forest: &Forest) -> Tree<u8> {
    assert_eq!(forest.0.len(), 1, "not a single tree");
    fn attach(tree: &mut Tree<u8>, parent: Option<usize>, node: &(u8, Forest)) {
        let idx = tree.add_node(parent, node.0);
        for child in &node.1 .0 {
            attach(tree, Some(idx), child);
        }
    }
    let mut tree = Tree::new();
    attach(&mut tree, None, &forest.0[0]);
    tree
}

/// Deterministic per-test parameter stream.
pub fn param_rng(seed: u64) -> SplitMix64 {
    SplitMix64::new(seed ^ 0xACCE_97A4_CE00_0000)
}
