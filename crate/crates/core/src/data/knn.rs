//! k-nearest-neighbor graph views built from feature rows.

use rayon::prelude::*;

use super::dataset::FeatureMatrix;
use super::graph::SparseGraph;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Above this many points brute force is still exact but quadratic; callers
/// wanting approximate search plug in their own [`NeighborSearch`].
pub const EXACT_SEARCH_LIMIT: usize = 50_000;

/// Source of the `k` nearest other rows for every row.
pub trait NeighborSearch {
    /// For each row, the indices of its `k` nearest other rows, nearest first.
    fn neighbors(&self, points: &DenseMatrix, k: usize) -> Vec<Vec<usize>>;
}

/// Exhaustive Euclidean search. Ties are broken toward the lower index.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSearch;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl NeighborSearch for ExactSearch {
    fn neighbors(&self, points: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
        let n = points.rows();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = points.row(i);
                let mut cand: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (sq_dist(xi, points.row(j)), j))
                    .collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < cand.len() {
                    cand.select_nth_unstable_by(k, cmp);
                    cand.truncate(k);
                }
                cand.sort_unstable_by(cmp);
                cand.into_iter().map(|(_, j)| j).collect()
            })
            .collect()
    }
}

/// Unit-weight k-NN graph, symmetrized by union, with optional unit self-loops.
pub fn build_knn_graph(features: &FeatureMatrix, k_neighbors: usize, self_loops: bool) -> Result<SparseGraph> {
    if features.n() > EXACT_SEARCH_LIMIT {
        log::warn!(
            "exact k-NN over {} points is quadratic; consider build_knn_graph_with and an approximate search",
            features.n()
        );
    }
    build_knn_graph_with(&ExactSearch, features, k_neighbors, self_loops)
}

pub fn build_knn_graph_with(
    search: &impl NeighborSearch,
    features: &FeatureMatrix,
    k_neighbors: usize,
    self_loops: bool,
) -> Result<SparseGraph> {
    let n = features.n();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::config(format!(
            "k_neighbors must be in 1..{n}, got {k_neighbors}"
        )));
    }
    let lists = search.neighbors(features.matrix(), k_neighbors);
    let mut edges: Vec<(usize, usize, f64)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j, 1.0)))
        .collect();
    if self_loops {
        edges.extend((0..n).map(|i| (i, i, 1.0)));
    }
    Ok(SparseGraph::symmetrized_union(n, edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::new(DenseMatrix::from_rows(rows)).unwrap()
    }

    /// Brute force over all pairs, sorting full candidate lists.
    fn oracle_edges(x: &FeatureMatrix, k: usize) -> Vec<(usize, usize)> {
        let n = x.n();
        let mut set = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(x.matrix().row(i), x.matrix().row(j)), j))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, j) in &all[..k] {
                set.insert((i, j));
                set.insert((j, i));
            }
        }
        set.into_iter().collect()
    }

    fn edge_pairs(g: &SparseGraph) -> Vec<(usize, usize)> {
        g.edges().map(|(i, j, _)| (i, j)).collect()
    }

    #[test]
    fn line_points_pair_up() {
        let x = feats(&[&[0.0], &[1.0], &[10.0], &[11.0]]);
        let g = build_knn_graph(&x, 1, false).unwrap();
        assert_eq!(edge_pairs(&g), vec![(0, 1), (1, 0), (2, 3), (3, 2)]);
        assert_eq!(edge_pairs(&g), oracle_edges(&x, 1));
    }

    #[test]
    fn k_n_minus_one_is_complete() {
        let x = feats(&[&[0.0, 1.0], &[3.0, -1.0], &[2.0, 2.0], &[5.0, 0.5], &[-1.0, 4.0]]);
        let g = build_knn_graph(&x, 4, false).unwrap();
        assert_eq!(g.nnz(), 5 * 4);
    }

    #[test]
    fn identical_points_break_ties_by_index() {
        let x = feats(&[&[1.0], &[1.0], &[1.0]]);
        let g = build_knn_graph(&x, 1, false).unwrap();
        // 0 -> 1, 1 -> 0, 2 -> 0
        assert_eq!(edge_pairs(&g), vec![(0, 1), (0, 2), (1, 0), (2, 0)]);
        assert_eq!(g, build_knn_graph(&x, 1, false).unwrap());
    }

    #[test]
    fn self_loops_and_symmetry() {
        let x = feats(&[&[0.0, 0.0], &[0.0, 1.0], &[5.0, 5.0], &[6.0, 5.0], &[2.0, 2.0]]);
        let g = build_knn_graph(&x, 2, true).unwrap();
        for i in 0..5 {
            assert_eq!(g.weight(i, i), Some(1.0));
        }
        for (i, j, w) in g.edges() {
            assert_eq!(g.weight(j, i), Some(w));
        }
        let mut no_loops: Vec<_> = edge_pairs(&g).into_iter().filter(|(i, j)| i != j).collect();
        no_loops.sort();
        assert_eq!(no_loops, oracle_edges(&x, 2));
    }

    #[test]
    fn rejects_k_at_least_n() {
        let x = feats(&[&[0.0], &[1.0]]);
        assert!(build_knn_graph(&x, 2, false).is_err());
    }
}
