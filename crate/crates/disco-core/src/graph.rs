//! Undirected weighted graphs in compressed sparse row form.
//!
//! Invariants of [`SparseGraph`], enforced by the builders and checked by
//! [`SparseGraph::validate`]:
//!
//! - symmetric: every edge is stored as both arcs (u,v) and (v,u), with equal
//!   weights;
//! - no self-loops;
//! - within each row, neighbor ids are strictly increasing;
//! - weights are finite and positive;
//! - offsets are non-decreasing and end at the arc count.

use crate::error::{Error, Result};
use crate::matrix::{for_each_row, Matrix};

/// Undirected weighted graph, CSR storage, both arcs per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseGraph {
    /// Graph with `num_nodes` nodes and no edges.
    pub fn empty(num_nodes: usize) -> Self {
        SparseGraph {
            num_nodes,
            row_offsets: vec![0; num_nodes + 1],
            col_indices: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Build from an undirected edge list. Each `(u, v, w)` entry stands for
    /// one undirected edge; listing an edge twice (in either orientation) is
    /// fine as long as the weights agree. Self-loops, out-of-range endpoints,
    /// non-positive or non-finite weights, and conflicting duplicate weights
    /// are rejected.
    pub fn from_edges(num_nodes: usize, edges: &[(u32, u32, f64)]) -> Result<Self> {
        let mut arcs: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            if u as usize >= num_nodes || v as usize >= num_nodes {
                return Err(Error::Invalid(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop on node {u}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Invalid(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            arcs.push((u, v, w));
            arcs.push((v, u, w));
        }
        arcs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        arcs.dedup_by(|next, prev| {
            next.0 == prev.0 && next.1 == prev.1 && next.2 == prev.2
        });
        // Any remaining adjacent duplicate is the same arc with a different weight.
        for pair in arcs.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) listed with conflicting weights {} and {}",
                    pair[0].0, pair[0].1, pair[0].2, pair[1].2
                )));
            }
        }

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _, _) in &arcs {
            row_offsets[u as usize + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = arcs.iter().map(|a| a.1).collect();
        let weights = arcs.iter().map(|a| a.2).collect();
        Ok(SparseGraph {
            num_nodes,
            row_offsets,
            col_indices,
            weights,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored arcs (twice the number of undirected edges).
    pub fn num_arcs(&self) -> usize {
        self.col_indices.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn degree(&self, u: u32) -> usize {
        self.row_offsets[u as usize + 1] - self.row_offsets[u as usize]
    }

    /// Neighbor ids of `u`, strictly increasing.
    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.col_indices[self.row_offsets[u as usize]..self.row_offsets[u as usize + 1]]
    }

    /// Weights aligned with [`SparseGraph::neighbors`].
    pub fn neighbor_weights(&self, u: u32) -> &[f64] {
        &self.weights[self.row_offsets[u as usize]..self.row_offsets[u as usize + 1]]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edge_weight(&self, u: u32, v: u32) -> Option<f64> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|pos| self.neighbor_weights(u)[pos])
    }

    /// Iterate each undirected edge once, as (u, v, w) with u < v.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.num_nodes as u32).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.neighbor_weights(u))
                .filter(move |(&v, _)| u < v)
                .map(move |(&v, &w)| (u, v, w))
        })
    }

    /// Check every structural invariant. Builders uphold these; this exists
    /// for loaders and property tests.
    pub fn validate(&self) -> Result<()> {
        if self.row_offsets.len() != self.num_nodes + 1 {
            return Err(Error::Invalid("offset array has wrong length".into()));
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len()
        {
            return Err(Error::Invalid("offsets do not span the arc array".into()));
        }
        if self.col_indices.len() != self.weights.len() {
            return Err(Error::Invalid("weights/indices length mismatch".into()));
        }
        for u in 0..self.num_nodes as u32 {
            if self.row_offsets[u as usize] > self.row_offsets[u as usize + 1] {
                return Err(Error::Invalid("offsets decrease".into()));
            }
            let nbrs = self.neighbors(u);
            for pair in nbrs.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::Invalid(format!(
                        "row {u} neighbor ids not strictly increasing"
                    )));
                }
            }
            for (&v, &w) in nbrs.iter().zip(self.neighbor_weights(u)) {
                if v as usize >= self.num_nodes {
                    return Err(Error::Invalid(format!("row {u} points past node count")));
                }
                if v == u {
                    return Err(Error::Invalid(format!("self-loop on node {u}")));
                }
                if !w.is_finite() || w <= 0.0 {
                    return Err(Error::Invalid(format!("arc ({u}, {v}) weight {w} invalid")));
                }
                match self.edge_weight(v, u) {
                    Some(back) if back == w => {}
                    _ => {
                        return Err(Error::Invalid(format!(
                            "arc ({u}, {v}) has no matching reverse arc"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Symmetrically normalized adjacency with self-loops,
/// S = D̃^{-1/2} (A + I) D̃^{-1/2} where D̃ is the degree of A + I.
///
/// Stored in CSR like the graph itself (same sparsity plus the diagonal).
/// Its spectral radius is at most 1, which is what makes deep propagation
/// stable.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

/// Build the normalized adjacency of `g`. Self-loops get weight 1 before
/// normalization, so an isolated node normalizes to a diagonal entry of 1.
pub fn normalize_adjacency(g: &SparseGraph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let mut deg = vec![1.0f64; n]; // the self-loop
    for u in 0..n as u32 {
        deg[u as usize] += g.neighbor_weights(u).iter().sum::<f64>();
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.num_arcs() + n);
    let mut values = Vec::with_capacity(g.num_arcs() + n);
    row_offsets.push(0);
    for u in 0..n as u32 {
        let ui = u as usize;
        let mut placed_diag = false;
        for (&v, &w) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
            if !placed_diag && v > u {
                col_indices.push(u);
                values.push(inv_sqrt[ui] * inv_sqrt[ui]);
                placed_diag = true;
            }
            col_indices.push(v);
            values.push(w * inv_sqrt[ui] * inv_sqrt[v as usize]);
        }
        if !placed_diag {
            col_indices.push(u);
            values.push(inv_sqrt[ui] * inv_sqrt[ui]);
        }
        row_offsets.push(col_indices.len());
    }
    NormalizedAdjacency {
        num_nodes: n,
        row_offsets,
        col_indices,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// S · X. Row-partitioned; bitwise identical serial or parallel.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.num_nodes, "propagation shape mismatch");
        let mut out = Matrix::zeros(self.num_nodes, x.cols());
        let cols = x.cols();
        let offsets = &self.row_offsets;
        let indices = &self.col_indices;
        let values = &self.values;
        for_each_row(out.as_mut_slice(), cols, |i, orow| {
            for k in offsets[i]..offsets[i + 1] {
                let v = values[k];
                let xrow = x.row(indices[k] as usize);
                for (o, &xv) in orow.iter_mut().zip(xrow.iter()) {
                    *o += v * xv;
                }
            }
        });
        out
    }

    /// Entry (i, j), zero if absent. For tests and small-scale checks.
    pub fn get(&self, i: u32, j: u32) -> f64 {
        let lo = self.row_offsets[i as usize];
        let hi = self.row_offsets[i as usize + 1];
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                m.set(i, self.col_indices[k] as usize, self.values[k]);
            }
        }
        m
    }
}

/// Subgraph induced by `ids` (distinct, any order). Returns the subgraph and
/// the remap table: `remap[new_id] = old_id`, ascending in old id. Edge
/// weights are preserved.
pub fn induced_subgraph(g: &SparseGraph, ids: &[u32]) -> Result<(SparseGraph, Vec<u32>)> {
    let mut remap: Vec<u32> = ids.to_vec();
    remap.sort_unstable();
    remap.dedup();
    if remap.len() != ids.len() {
        return Err(Error::Invalid("subgraph ids contain duplicates".into()));
    }
    if let Some(&last) = remap.last() {
        if last as usize >= g.num_nodes() {
            return Err(Error::Invalid(format!(
                "subgraph id {last} out of range for {} nodes",
                g.num_nodes()
            )));
        }
    }
    let mut new_id = vec![u32::MAX; g.num_nodes()];
    for (new, &old) in remap.iter().enumerate() {
        new_id[old as usize] = new as u32;
    }

    // Old ids ascend and the mapping is monotone, so each new row's neighbor
    // ids come out strictly increasing without re-sorting.
    let n = remap.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut weights = Vec::new();
    row_offsets.push(0);
    for &old in &remap {
        for (&v, &w) in g.neighbors(old).iter().zip(g.neighbor_weights(old)) {
            let nv = new_id[v as usize];
            if nv != u32::MAX {
                col_indices.push(nv);
                weights.push(w);
            }
        }
        row_offsets.push(col_indices.len());
    }
    let sub = SparseGraph {
        num_nodes: n,
        row_offsets,
        col_indices,
        weights,
    };
    Ok((sub, remap))
}
