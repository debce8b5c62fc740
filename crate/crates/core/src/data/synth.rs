//! Seeded multi-view test data: Gaussian blobs around centroids shared by all
//! views, each view with its own noise draw and stochastic-block-style graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dataset::{FeatureMatrix, MultiViewDataset, View};
use super::graph::SparseGraph;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub views: usize,
    /// Standard deviation of the per-point feature noise; also the fraction of
    /// graph edges that ignore the cluster structure (capped at 1).
    pub noise: f64,
    pub seed: u64,
    pub feature_dim: usize,
    /// Expected number of neighbors per node before symmetrization.
    pub avg_degree: usize,
    pub propagation_order: usize,
    /// Views whose features and graph carry no cluster information.
    pub noise_views: Vec<usize>,
}

impl SynthConfig {
    pub fn new(n: usize, k: usize, views: usize, noise: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            views,
            noise,
            seed,
            feature_dim: (2 * k).max(8),
            avg_degree: 8,
            propagation_order: 2,
            noise_views: Vec::new(),
        }
    }

    pub fn generate(&self) -> Result<MultiViewDataset> {
        let &Self { n, k, views, noise, .. } = self;
        if k < 2 || n < k {
            return Err(Error::config(format!("need n >= k >= 2, got n = {n}, k = {k}")));
        }
        if views == 0 {
            return Err(Error::config("need at least one view"));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::config(format!("noise must be a nonnegative number, got {noise}")));
        }
        let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.feature_dim;
        let mix = noise.min(1.0);
        let centroids = DenseMatrix::from_fn(k, d, |_, _| rng.sample(StandardNormal));
        let mut out = Vec::with_capacity(views);
        for v in 0..views {
            let pure_noise = self.noise_views.contains(&v);
            let features = if pure_noise {
                DenseMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
            } else {
                let mut x = DenseMatrix::zeros(n, d);
                for i in 0..n {
                    let c = centroids.row(labels[i]);
                    for (j, out) in x.row_mut(i).iter_mut().enumerate() {
                        let eps: f64 = rng.sample(StandardNormal);
                        *out = c[j] + noise * eps;
                    }
                }
                x
            };
            let half = self.avg_degree.div_ceil(2);
            let mut edges = Vec::with_capacity(n * half);
            for i in 0..n {
                for _ in 0..half {
                    let pool: &[usize] = if !pure_noise && rng.random::<f64>() >= mix {
                        &members[labels[i]]
                    } else {
                        &[]
                    };
                    let j = if pool.len() > 1 {
                        pool[rng.random_range(0..pool.len())]
                    } else {
                        rng.random_range(0..n)
                    };
                    if j != i {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            let graph = SparseGraph::symmetrized_union(n, edges)?;
            out.push(View::new(FeatureMatrix::new(features)?, Some(graph), self.propagation_order));
        }
        MultiViewDataset::new(out, Some(labels))
    }
}

/// `SynthConfig::new(n, k, views, noise, seed).generate()`.
pub fn synth_multiview(n: usize, k: usize, views: usize, noise: f64, seed: u64) -> Result<MultiViewDataset> {
    SynthConfig::new(n, k, views, noise, seed).generate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_deterministic() {
        let a = synth_multiview(300, 3, 2, 0.1, 0).unwrap();
        let b = synth_multiview(300, 3, 2, 0.1, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.view_count(), 2);
        let labels = a.labels().unwrap();
        for c in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 100);
        }
        assert_ne!(a, synth_multiview(300, 3, 2, 0.1, 1).unwrap());
    }

    #[test]
    fn zero_noise_rows_sit_on_centroids() {
        let ds = synth_multiview(60, 4, 3, 0.0, 9).unwrap();
        let labels = ds.labels().unwrap();
        for view in ds.views() {
            let x = view.features.matrix();
            for i in 0..60 {
                for j in 0..60 {
                    if labels[i] == labels[j] {
                        assert_eq!(x.row(i), x.row(j));
                    }
                }
            }
            assert_eq!(x.row(0), ds.views()[0].features.matrix().row(0));
            // zero noise also means every edge stays inside its cluster
            for (i, j, _) in view.graph.as_ref().unwrap().edges() {
                assert_eq!(labels[i], labels[j]);
            }
        }
    }

    #[test]
    fn preconditions() {
        assert!(synth_multiview(10, 1, 1, 0.1, 0).is_err());
        assert!(synth_multiview(2, 3, 1, 0.1, 0).is_err());
        assert!(synth_multiview(10, 2, 0, 0.1, 0).is_err());
    }
}
