//! Feature smoothing over a view's graph: `X <- S^p X` for a normalized
//! adjacency `S`, applied once per view before clustering.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{io, FeatureMatrix, MultiViewDataset, SparseGraph};
use crate::dense::DenseMatrix;
use crate::error::{DataError, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degrees of `A + I`.
    #[default]
    SymSelfloop,
    /// `D^{-1/2} A D^{-1/2}`; isolated nodes map to zero rows.
    Sym,
    /// `D^{-1} (A + I)`.
    Row,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::SymSelfloop => "sym_selfloop",
            Normalization::Sym => "sym",
            Normalization::Row => "row",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym_selfloop" => Ok(Self::SymSelfloop),
            "sym" => Ok(Self::Sym),
            "row" => Ok(Self::Row),
            other => Err(Error::config(format!("unknown normalization `{other}`"))),
        }
    }
}

/// A graph's propagation operator in CSR form with normalized entries.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    degrees: Vec<f64>,
    normalization: Normalization,
}

impl NormalizedAdjacency {
    pub fn new(graph: &SparseGraph, normalization: Normalization) -> Self {
        let n = graph.n();
        let (gp, gi, gw) = graph.csr();
        let self_loops = normalization != Normalization::Sym;
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(gi.len() + if self_loops { n } else { 0 });
        let mut values = Vec::with_capacity(indices.capacity());
        indptr.push(0);
        for i in 0..n {
            let mut diag_done = !self_loops;
            for k in gp[i]..gp[i + 1] {
                let (j, w) = (gi[k], gw[k]);
                if !diag_done && j >= i {
                    if j == i {
                        indices.push(i);
                        values.push(w + 1.0);
                        diag_done = true;
                        continue;
                    }
                    indices.push(i);
                    values.push(1.0);
                    diag_done = true;
                }
                indices.push(j);
                values.push(w);
            }
            if !diag_done {
                indices.push(i);
                values.push(1.0);
            }
            indptr.push(indices.len());
        }
        let degrees: Vec<f64> = (0..n).map(|i| values[indptr[i]..indptr[i + 1]].iter().sum()).collect();
        let inv = |d: f64, pow: f64| if d > 0.0 { d.powf(-pow) } else { 0.0 };
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                let j = indices[k];
                values[k] *= match normalization {
                    Normalization::Row => inv(degrees[i], 1.0),
                    _ => inv(degrees[i], 0.5) * inv(degrees[j], 0.5),
                };
            }
        }
        Self {
            n,
            indptr,
            indices,
            values,
            degrees,
            normalization,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Degrees of the operator's base matrix (`A + I` for self-loop variants).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// One sparse-dense product `S X`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n {
            return Err(Error::dim(format!(
                "operator over {} nodes applied to {} rows",
                self.n,
                x.rows()
            )));
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        if d == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, row)| {
                for k in self.indptr[i]..self.indptr[i + 1] {
                    let w = self.values[k];
                    for (o, v) in row.iter_mut().zip(x.row(self.indices[k])) {
                        *o += w * v;
                    }
                }
            });
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.values[k];
            }
        }
        m
    }
}

/// `S^p X` as `p` successive sparse-dense products.
pub fn propagate(adj: &NormalizedAdjacency, features: &FeatureMatrix, p: usize) -> Result<FeatureMatrix> {
    if adj.n() != features.n() {
        return Err(Error::dim(format!(
            "graph has {} nodes, features have {} rows",
            adj.n(),
            features.n()
        )));
    }
    if p == 0 {
        return Ok(features.clone());
    }
    let mut x = adj.apply(features.matrix())?;
    for _ in 1..p {
        x = adj.apply(&x)?;
    }
    if !x.is_finite() {
        return Err(Error::numeric(format!("propagation of order {p} produced non-finite values")));
    }
    FeatureMatrix::new(x)
}

/// Content hash naming a cached propagation result.
pub fn cache_key(graph: &SparseGraph, features: &FeatureMatrix, p: usize, norm: Normalization) -> String {
    let mut h = Sha256::new();
    h.update(b"mvsc-propagate-v1");
    h.update((graph.n() as u64).to_le_bytes());
    for (i, j, w) in graph.edges() {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
        h.update(w.to_le_bytes());
    }
    h.update((features.n() as u64).to_le_bytes());
    h.update((features.d() as u64).to_le_bytes());
    for v in features.matrix().as_slice() {
        h.update(v.to_le_bytes());
    }
    h.update((p as u64).to_le_bytes());
    h.update(norm.as_str().as_bytes());
    hex::encode(h.finalize())
}

/// Propagates through `cache_dir`, reading a previous result when one exists.
pub fn propagate_cached(
    graph: &SparseGraph,
    features: &FeatureMatrix,
    p: usize,
    norm: Normalization,
    cache_dir: &Path,
) -> Result<FeatureMatrix> {
    if p == 0 {
        return Ok(features.clone());
    }
    let path = cache_dir.join(format!("{}.feat", cache_key(graph, features, p, norm)));
    if path.exists() {
        let cached = io::read_features(&path)?;
        if cached.n() == features.n() && cached.d() == features.d() {
            return Ok(cached);
        }
        log::warn!("{}: cached shape disagrees with input, recomputing", path.display());
    }
    let out = propagate(&NormalizedAdjacency::new(graph, norm), features, p)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| DataError::io(cache_dir, e))?;
    let tmp: PathBuf = path.with_extension(format!("tmp{}", std::process::id()));
    io::write_features(out.matrix(), &tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| DataError::io(&path, e))?;
    Ok(out)
}

/// Smooths every view with its propagation order, in parallel across views.
pub fn prepare_views(
    dataset: &MultiViewDataset,
    norm: Normalization,
    cache_dir: Option<&Path>,
) -> Result<Vec<FeatureMatrix>> {
    (0..dataset.view_count())
        .into_par_iter()
        .map(|v| {
            let view = &dataset.views()[v];
            let p = view.propagation_order;
            if p == 0 {
                return Ok(view.features.clone());
            }
            let graph = dataset
                .propagation_graph(v)
                .ok_or_else(|| Error::config(format!("propagation order {p} but no graph to propagate over")))
                .map_err(|e| e.in_view(v))?;
            match cache_dir {
                Some(dir) => propagate_cached(graph, &view.features, p, norm, dir),
                None => propagate(&NormalizedAdjacency::new(graph, norm), &view.features, p),
            }
            .map_err(|e| e.in_view(v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> SparseGraph {
        let edges = (0..n - 1).map(|i| (i, i + 1, 1.0));
        SparseGraph::symmetrized_union(n, edges).unwrap()
    }

    #[test]
    fn order_zero_is_identity() {
        let g = path_graph(4);
        let x = FeatureMatrix::new(DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64)).unwrap();
        let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
        assert_eq!(propagate(&adj, &x, 0).unwrap(), x);
    }

    #[test]
    fn two_node_hand_computed() {
        let g = SparseGraph::symmetrized_union(2, [(0, 1, 1.0)]).unwrap();
        let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
        assert_eq!(adj.degrees(), &[2.0, 2.0]);
        let x = FeatureMatrix::new(DenseMatrix::from_rows(&[[1.0], [0.0]])).unwrap();
        let y = propagate(&adj, &x, 1).unwrap();
        assert!((y.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((y.matrix()[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn existing_self_loops_are_incremented() {
        let g = SparseGraph::symmetrized_union(2, [(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
        assert_eq!(adj.degrees(), &[3.0, 2.0]);
        let dense = adj.to_dense();
        assert!((dense[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((dense[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn row_normalization_is_stochastic() {
        let g = SparseGraph::symmetrized_union(5, [(0, 1, 2.0), (1, 2, 1.0), (3, 4, 0.5), (0, 4, 1.0)]).unwrap();
        let adj = NormalizedAdjacency::new(&g, Normalization::Row);
        for s in adj.to_dense().row_sums() {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sym_without_loops_zeroes_isolated_nodes() {
        let g = SparseGraph::symmetrized_union(3, [(0, 1, 1.0)]).unwrap();
        let adj = NormalizedAdjacency::new(&g, Normalization::Sym);
        let x = FeatureMatrix::new(DenseMatrix::from_rows(&[[1.0], [2.0], [3.0]])).unwrap();
        let y = propagate(&adj, &x, 1).unwrap();
        assert_eq!(y.matrix().column(0), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let adj = NormalizedAdjacency::new(&path_graph(3), Normalization::SymSelfloop);
        let x = FeatureMatrix::new(DenseMatrix::zeros(4, 1)).unwrap();
        assert!(matches!(propagate(&adj, &x, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn cache_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let g = path_graph(6);
        let x = FeatureMatrix::new(DenseMatrix::from_fn(6, 2, |i, j| (i as f64).sin() + j as f64)).unwrap();
        let a = propagate_cached(&g, &x, 3, Normalization::SymSelfloop, tmp.path()).unwrap();
        assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);
        let b = propagate_cached(&g, &x, 3, Normalization::SymSelfloop, tmp.path()).unwrap();
        assert_eq!(a, b);
        let direct = propagate(&NormalizedAdjacency::new(&g, Normalization::SymSelfloop), &x, 3).unwrap();
        assert_eq!(a, direct);
        assert_ne!(
            cache_key(&g, &x, 3, Normalization::SymSelfloop),
            cache_key(&g, &x, 4, Normalization::SymSelfloop)
        );
    }
}
