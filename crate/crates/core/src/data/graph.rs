use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Weighted sparse graph over `n` nodes, stored in compressed sparse rows.
///
/// Construction validates indices and weights and rejects duplicate
/// `(row, col)` pairs. When `symmetric` is set every edge has an equal-weight
/// reverse edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGraph {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    symmetric: bool,
}

impl SparseGraph {
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        symmetric: bool,
    ) -> Result<Self, GraphError> {
        let mut edges: Vec<(usize, usize, f64)> = edges.into_iter().collect();
        for &(row, col, weight) in &edges {
            if row >= n || col >= n {
                return Err(GraphError::IndexOutOfRange { row, col, n });
            }
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(GraphError::BadWeight { row, col, weight });
            }
        }
        edges.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = edges.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(GraphError::Duplicate {
                row: w[0].0,
                col: w[0].1,
            });
        }
        let graph = Self::from_sorted(n, &edges, symmetric);
        if symmetric {
            graph.check_symmetric()?;
        }
        Ok(graph)
    }

    /// Builds a symmetric graph from undirected edges: each pair is inserted in
    /// both directions and repeated pairs keep their largest weight.
    pub fn symmetrized_union(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut both = Vec::new();
        for (row, col, weight) in edges {
            if row >= n || col >= n {
                return Err(GraphError::IndexOutOfRange { row, col, n });
            }
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(GraphError::BadWeight { row, col, weight });
            }
            both.push((row, col, weight));
            if row != col {
                both.push((col, row, weight));
            }
        }
        both.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
        both.dedup_by_key(|e| (e.0, e.1));
        Ok(Self::from_sorted(n, &both, true))
    }

    fn from_sorted(n: usize, edges: &[(usize, usize, f64)], symmetric: bool) -> Self {
        let mut indptr = vec![0usize; n + 1];
        for &(r, _, _) in edges {
            indptr[r + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices: edges.iter().map(|e| e.1).collect(),
            weights: edges.iter().map(|e| e.2).collect(),
            symmetric,
        }
    }

    fn check_symmetric(&self) -> Result<(), GraphError> {
        for (row, col, w) in self.edges() {
            if self.weight(col, row) != Some(w) {
                return Err(GraphError::NotSymmetric { row, col });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Neighbors of `i` with their weights, in increasing column order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    pub fn weight(&self, row: usize, col: usize) -> Option<f64> {
        let span = self.indptr[row]..self.indptr[row + 1];
        let cols = &self.indices[span.clone()];
        cols.binary_search(&col)
            .ok()
            .map(|k| self.weights[span.start + k])
    }

    /// All stored entries in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).map(move |(j, w)| (i, j, w)))
    }

    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.indptr, &self.indices, &self.weights)
    }
}
