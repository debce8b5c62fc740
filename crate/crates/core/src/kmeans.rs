//! Lloyd's k-means with greedy k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Hard assignment of `n` points to `k` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::config(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Relabels arbitrary integer labels to `0..k` in order of first appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { labels, k: map.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// `n x k` 0/1 indicator matrix; every row has exactly one 1.
    pub fn indicator(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.n(), self.k);
        for (i, &l) in self.labels.iter().enumerate() {
            g[(i, l)] = 1.0;
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on total squared centroid movement, relative to
    /// the mean per-feature variance of the data.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub partition: Partition,
    pub inertia: f64,
    pub centroids: DenseMatrix,
    pub iterations: usize,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    // rounding left target at the very end
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Greedy k-means++: each new center is the best of `2 + ln k` D²-sampled
/// candidates.
fn kmeanspp(x: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = x.rows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = DenseMatrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(x.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let candidates: Vec<usize> = if total > 0.0 {
            (0..trials).map(|_| weighted_pick(rng, &closest, total)).collect()
        } else {
            vec![rng.random_range(0..n)]
        };
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for cand in candidates {
            let updated: Vec<f64> = closest
                .par_iter()
                .enumerate()
                .map(|(i, &d)| d.min(sq_dist(x.row(i), x.row(cand))))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().map_or(true, |b| potential < b.0) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, pick, updated) = best.expect("at least one candidate");
        centers.row_mut(c).copy_from_slice(x.row(pick));
        closest = updated;
    }
    centers
}

/// Nearest-centroid labels and squared distances (ties go to the lower index).
fn assign(x: &DenseMatrix, centers: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut best = (0usize, f64::INFINITY);
            for c in 0..centers.rows() {
                let d = sq_dist(xi, centers.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(x: &DenseMatrix, centers: &mut DenseMatrix, labels: &mut [usize], dists: &mut [f64]) {
    let k = centers.rows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..labels.len() {
            if sizes[labels[i]] > 1 && far.map_or(true, |f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        dists[i] = 0.0;
        centers.row_mut(c).copy_from_slice(x.row(i));
    }
}

fn update_centers(x: &DenseMatrix, labels: &[usize], centers: &DenseMatrix) -> DenseMatrix {
    let (k, d) = centers.shape();
    let mut sums = DenseMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums.row_mut(c).copy_from_slice(centers.row(c));
        } else {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    sums
}

pub fn kmeans(x: &DenseMatrix, k: usize, opts: &KMeansOptions) -> Result<KMeansFit> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::config(format!("k-means needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if !x.is_finite() {
        return Err(Error::numeric("k-means input has non-finite entries"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centers = kmeanspp(x, k, &mut rng);

    let d = x.cols().max(1);
    let mean_var = {
        let centered = crate::linalg::center_columns(x);
        centered.as_slice().iter().map(|v| v * v).sum::<f64>() / (n * d) as f64
    };
    let tol = opts.tol * mean_var;

    let (mut labels, mut dists) = assign(x, &centers);
    repair_empty(x, &mut centers, &mut labels, &mut dists);
    let mut history = vec![dists.iter().sum::<f64>()];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = update_centers(x, &labels, &centers);
        let shift: f64 = (0..k).map(|c| sq_dist(next.row(c), centers.row(c))).sum();
        centers = next;
        let (new_labels, new_dists) = assign(x, &centers);
        let unchanged = new_labels == labels;
        labels = new_labels;
        dists = new_dists;
        repair_empty(x, &mut centers, &mut labels, &mut dists);
        let inertia: f64 = dists.iter().sum();
        let prev = *history.last().expect("seeded");
        debug_assert!(
            inertia <= prev * (1.0 + 1e-12) + 1e-12,
            "inertia rose from {prev} to {inertia}"
        );
        history.push(inertia);
        if unchanged || shift <= tol {
            break;
        }
    }
    let inertia = *history.last().expect("seeded");
    Ok(KMeansFit {
        partition: Partition { labels, k },
        inertia,
        centroids: centers,
        iterations,
        inertia_history: history,
    })
}
