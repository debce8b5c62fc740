//! End-to-end consensus clustering.
//!
//! Per view: center the features, take the `f` leading left singular vectors
//! `U`, map them through the kernel feature map (`B = Φ(U)`), normalize `B` by
//! its implicit degrees, embed, and run k-means. View weights come from the
//! clusterability traces; the weighted factors are concatenated column-wise so
//! that the consensus affinity `Σ λ_v B_v B_vᵀ` is again a product `B Bᵀ`,
//! which is normalized, embedded and clustered once more.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, MultiViewDataset};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelMap, KernelParams, KernelSettings};
use crate::kmeans::{kmeans, KMeansOptions, Partition};
use crate::linalg::{center_columns, truncated_svd, SvdSettings};
use crate::propagate::{prepare_views, Normalization};
use crate::spectral::{normalize, spectral_embedding, FactorMatrix};
use crate::weights::{clusterability_trace, view_weights, ViewWeights, WeightMode};

/// Largest `n` for which [`consensus_affinity_oracle`] will materialize `n x n`.
pub const ORACLE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatScale {
    /// Blocks scaled by `√λ_v`, so the concatenated Gram is `Σ λ_v B_v B_vᵀ`.
    #[default]
    SqrtLambda,
    /// Blocks scaled by `λ_v` (Gram is `Σ λ_v² B_v B_vᵀ`).
    Lambda,
}

impl std::str::FromStr for ConcatScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" | "sqrt_lambda" => Ok(Self::SqrtLambda),
            "linear" | "lambda" => Ok(Self::Lambda),
            other => Err(Error::config(format!("unknown concat scale `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// `f + 1` leading singular vectors with the first dropped.
    #[default]
    DropFirst,
    /// The `k` leading singular vectors, none dropped.
    LeadingK,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFactor {
    /// Traces use the degree-normalized factor.
    #[default]
    Normalized,
    /// Traces use the raw feature-map output.
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub k: usize,
    /// Components per view; `None` means `f = k`.
    pub f: Option<usize>,
    pub temperature: f64,
    pub kernel: KernelSettings,
    /// SVD of the centered feature matrices.
    pub data_svd: SvdSettings,
    /// SVDs of the normalized factors.
    pub embed_svd: SvdSettings,
    pub kmeans: KMeansOptions,
    pub weight_mode: WeightMode,
    pub concat_scale: ConcatScale,
    pub embedding: EmbeddingMode,
    pub trace_factor: TraceFactor,
    pub normalization: Normalization,
    /// Overrides of per-view propagation orders, keyed by view index.
    pub propagation: BTreeMap<usize, usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 2,
            f: None,
            temperature: 0.1,
            kernel: KernelSettings::default(),
            data_svd: SvdSettings::randomized(),
            embed_svd: SvdSettings::default(),
            kmeans: KMeansOptions::default(),
            weight_mode: WeightMode::default(),
            concat_scale: ConcatScale::default(),
            embedding: EmbeddingMode::default(),
            trace_factor: TraceFactor::default(),
            normalization: Normalization::default(),
            propagation: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn components(&self) -> usize {
        self.f.unwrap_or(self.k)
    }

    /// `(dimension kept, drop first)` for every spectral embedding.
    fn embedding_shape(&self) -> (usize, bool) {
        match self.embedding {
            EmbeddingMode::DropFirst => (self.components(), true),
            EmbeddingMode::LeadingK => (self.k, false),
        }
    }

    pub fn nystroem_components(&self) -> usize {
        self.kernel.components.unwrap_or(10 * self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.components() < 1 {
            return Err(Error::config("f must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if let Some(g) = self.kernel.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::config(format!("gamma must be positive, got {g}")));
            }
        }
        if !self.kernel.coef0.is_finite() {
            return Err(Error::config("coef0 must be finite"));
        }
        if self.kmeans.max_iter == 0 {
            return Err(Error::config("k-means max_iter must be positive"));
        }
        Ok(())
    }

    /// Kernel output dimension for a given view size.
    pub fn kernel_output_dim(&self) -> usize {
        let f = self.components();
        match self.kernel.kind {
            KernelKind::Quadratic => f * (f + 1) / 2,
            _ => self.nystroem_components(),
        }
    }

    pub fn stage_seed(&self, stage: Stage, view: Option<usize>) -> u64 {
        let tag = stage as u64 + 1;
        let v = view.map_or(0, |v| v as u64 + 1);
        splitmix64(self.seed ^ splitmix64(tag.wrapping_mul(0x9E37_79B9) ^ (v << 32)))
    }
}

/// Pipeline steps that consume randomness; each gets an independent seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    DataSvd,
    KernelFit,
    ViewEmbed,
    ViewKMeans,
    ConsensusEmbed,
    ConsensusKMeans,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

struct Stopwatch(Vec<StageTiming>);

impl Stopwatch {
    fn time<T>(&mut self, stage: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage: stage.into(),
            ms: t.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Everything the consensus step needs from one view.
#[derive(Debug, Clone)]
pub struct ViewOutcome {
    /// Degree-normalized `Φ(U_v)`.
    pub factor: FactorMatrix,
    pub partition: Partition,
    pub trace: f64,
    pub nonpositive_degrees: usize,
    pub timings: Vec<StageTiming>,
}

/// The per-view stage: center, SVD, feature map, normalize, embed, k-means.
pub fn view_stage(x: &DenseMatrix, config: &PipelineConfig, view: usize) -> Result<ViewOutcome> {
    let f = config.components();
    let (n, d) = x.shape();
    if f > n.min(d) {
        return Err(Error::config(format!("f = {f} exceeds the {n}x{d} feature matrix")));
    }
    let mut sw = Stopwatch(Vec::new());
    let centered = sw.time("center", || center_columns(x));
    let u = sw
        .time("svd", || {
            truncated_svd(&centered, f, &config.data_svd, config.stage_seed(Stage::DataSvd, Some(view)))
        })?
        .left_informative();
    drop(centered);
    let params = KernelParams {
        gamma: config.kernel.gamma.unwrap_or(1.0 / f as f64),
        coef0: config.kernel.coef0,
    };
    let raw = sw.time("kernel", || {
        KernelMap::fit(
            config.kernel.kind,
            &u,
            config.nystroem_components(),
            params,
            config.stage_seed(Stage::KernelFit, Some(view)),
        )?
        .apply(&u)
    })?;
    let (dim, drop_first) = config.embedding_shape();
    if dim + usize::from(drop_first) > raw.m().min(n) {
        return Err(Error::config(format!(
            "kernel map has {} components, fewer than the {} singular vectors the embedding needs",
            raw.m(),
            dim + usize::from(drop_first)
        )));
    }
    let unnormalized_trace = config.trace_factor == TraceFactor::Unnormalized;
    let raw_copy = unnormalized_trace.then(|| raw.clone());
    let (factor, degrees) = sw.time("normalize", || normalize(raw))?;
    let embedding = sw.time("embed", || {
        spectral_embedding(
            &factor,
            dim,
            drop_first,
            &config.embed_svd,
            config.stage_seed(Stage::ViewEmbed, Some(view)),
        )
    })?;
    let opts = KMeansOptions {
        seed: config.stage_seed(Stage::ViewKMeans, Some(view)),
        ..config.kmeans
    };
    let fit = sw.time("kmeans", || kmeans(&embedding.coords, config.k, &opts))?;
    let trace = clusterability_trace(raw_copy.as_ref().unwrap_or(&factor), &fit.partition)?;
    let timings = sw
        .0
        .into_iter()
        .map(|t| StageTiming {
            stage: format!("view{view}.{}", t.stage),
            ms: t.ms,
        })
        .collect();
    Ok(ViewOutcome {
        factor,
        partition: fit.partition,
        trace,
        nonpositive_degrees: degrees.nonpositive,
        timings,
    })
}

/// Column-wise concatenation of `scale(λ_v) · B_v`.
pub fn concat_factors(factors: &[&FactorMatrix], lambdas: &[f64], scale: ConcatScale) -> Result<FactorMatrix> {
    if factors.len() != lambdas.len() || factors.is_empty() {
        return Err(Error::dim(format!("{} factors with {} weights", factors.len(), lambdas.len())));
    }
    let blocks: Vec<DenseMatrix> = factors
        .iter()
        .zip(lambdas)
        .map(|(b, &l)| {
            let mut m = b.values().clone();
            m.scale(match scale {
                ConcatScale::SqrtLambda => l.sqrt(),
                ConcatScale::Lambda => l,
            });
            m
        })
        .collect();
    let refs: Vec<&DenseMatrix> = blocks.iter().collect();
    Ok(FactorMatrix::new(DenseMatrix::hcat(&refs)?))
}

/// Materializes `Σ_v λ_v B_v B_vᵀ` for checking the concatenated form.
/// Test-scale only.
pub fn consensus_affinity_oracle(factors: &[&FactorMatrix], lambdas: &[f64]) -> Result<DenseMatrix> {
    let n = factors.first().map_or(0, |b| b.n());
    if n > ORACLE_LIMIT {
        return Err(Error::dim(format!("oracle limited to n <= {ORACLE_LIMIT}, got {n}")));
    }
    if factors.len() != lambdas.len() || factors.iter().any(|b| b.n() != n) {
        return Err(Error::dim("factors and weights disagree"));
    }
    let mut w = DenseMatrix::zeros(n, n);
    for (b, &l) in factors.iter().zip(lambdas) {
        let g = b.values().matmul_t(b.values())?;
        for (o, v) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += l * v;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub consensus: Partition,
    pub per_view: Vec<Partition>,
    pub weights: ViewWeights,
    pub consensus_inertia: f64,
    /// Nonpositive implicit degrees floored across all normalizations.
    pub nonpositive_degrees: usize,
    pub timings: Vec<StageTiming>,
    pub config: PipelineConfig,
}

impl ClusteringResult {
    pub fn total_ms(&self) -> f64 {
        self.timings.iter().filter(|t| !t.stage.contains('.')).map(|t| t.ms).sum()
    }
}

/// Runs the clustering on already-propagated view features.
pub fn run_on_features(features: &[FeatureMatrix], config: &PipelineConfig) -> Result<ClusteringResult> {
    config.validate()?;
    let Some(first) = features.first() else {
        return Err(Error::config("no views"));
    };
    let n = first.n();
    if let Some(v) = features.iter().position(|x| x.n() != n) {
        return Err(Error::dim(format!("view {v} has {} rows, view 0 has {n}", features[v].n())));
    }
    if config.k > n {
        return Err(Error::config(format!("k = {} exceeds n = {n}", config.k)));
    }
    let mut sw = Stopwatch(Vec::new());
    let outcomes: Vec<ViewOutcome> = sw.time("views", || {
        features
            .par_iter()
            .enumerate()
            .map(|(v, x)| view_stage(x.matrix(), config, v).map_err(|e| e.in_view(v)))
            .collect::<Result<Vec<_>>>()
    })?;
    let traces: Vec<f64> = outcomes.iter().map(|o| o.trace).collect();
    let weights = sw.time("weights", || view_weights(&traces, config.temperature, config.weight_mode))?;
    let factors: Vec<&FactorMatrix> = outcomes.iter().map(|o| &o.factor).collect();
    let concat = sw.time("concat", || concat_factors(&factors, &weights.lambdas, config.concat_scale))?;
    let (consensus, degrees) = sw.time("normalize", || normalize(concat))?;
    let (dim, drop_first) = config.embedding_shape();
    let embedding = sw.time("embed", || {
        spectral_embedding(
            &consensus,
            dim,
            drop_first,
            &config.embed_svd,
            config.stage_seed(Stage::ConsensusEmbed, None),
        )
    })?;
    let opts = KMeansOptions {
        seed: config.stage_seed(Stage::ConsensusKMeans, None),
        ..config.kmeans
    };
    let fit = sw.time("kmeans", || kmeans(&embedding.coords, config.k, &opts))?;
    let mut timings = sw.0;
    let mut nonpositive = degrees.nonpositive;
    let mut per_view = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        timings.extend(o.timings);
        nonpositive += o.nonpositive_degrees;
        per_view.push(o.partition);
    }
    Ok(ClusteringResult {
        consensus: fit.partition,
        per_view,
        weights,
        consensus_inertia: fit.inertia,
        nonpositive_degrees: nonpositive,
        timings,
        config: config.clone(),
    })
}

/// Applies the config's propagation overrides, smooths every view (through
/// `cache_dir` when given) and clusters.
pub fn run_mvsck_cached(
    dataset: &MultiViewDataset,
    config: &PipelineConfig,
    cache_dir: Option<&Path>,
) -> Result<ClusteringResult> {
    config.validate()?;
    let mut ds;
    let dataset = if config.propagation.is_empty() {
        dataset
    } else {
        ds = dataset.clone();
        for (&v, &p) in &config.propagation {
            ds.set_propagation_order(v, p)?;
        }
        &ds
    };
    let t = Instant::now();
    let features = prepare_views(dataset, config.normalization, cache_dir)?;
    let prep_ms = t.elapsed().as_secs_f64() * 1e3;
    let mut result = run_on_features(&features, config)?;
    result.timings.insert(
        0,
        StageTiming {
            stage: "propagate".into(),
            ms: prep_ms,
        },
    );
    Ok(result)
}

pub fn run_mvsck(dataset: &MultiViewDataset, config: &PipelineConfig) -> Result<ClusteringResult> {
    run_mvsck_cached(dataset, config, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_multiview;
    use crate::metrics::ari;

    #[test]
    fn recovers_synthetic_clusters() {
        let ds = synth_multiview(1000, 5, 3, 0.1, 0).unwrap();
        let res = run_mvsck(&ds, &PipelineConfig::new(5)).unwrap();
        let score = ari(res.consensus.labels(), ds.labels().unwrap()).unwrap();
        assert!(score >= 0.95, "ARI {score}");
        assert_eq!(res.consensus.n(), 1000);
        assert_eq!(res.per_view.len(), 3);
        let total: f64 = res.weights.lambdas.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = synth_multiview(200, 4, 2, 0.3, 3).unwrap();
        let cfg = PipelineConfig::new(4);
        let a = run_mvsck(&ds, &cfg).unwrap();
        let b = run_mvsck(&ds, &cfg).unwrap();
        assert_eq!(a.consensus, b.consensus);
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn config_validation() {
        let ds = synth_multiview(50, 2, 1, 0.1, 0).unwrap();
        let mut cfg = PipelineConfig::new(1);
        assert!(matches!(run_mvsck(&ds, &cfg), Err(Error::Config(_))));
        cfg.k = 2;
        cfg.temperature = 0.0;
        assert!(matches!(run_mvsck(&ds, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn kernel_too_small_is_reported_with_view() {
        let ds = synth_multiview(50, 2, 1, 0.1, 0).unwrap();
        let mut cfg = PipelineConfig::new(2);
        cfg.f = Some(1);
        let err = run_mvsck(&ds, &cfg).unwrap_err();
        assert!(matches!(err, Error::View { view: 0, .. }), "{err}");
    }

    #[test]
    fn oracle_guard_and_trivial_cases() {
        let b = FactorMatrix::new(DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]));
        let c = FactorMatrix::new(DenseMatrix::from_rows(&[[3.0], [1.0]]));
        let w = consensus_affinity_oracle(&[&b], &[1.0]).unwrap();
        assert_eq!(w, b.values().matmul_t(b.values()).unwrap());
        let w = consensus_affinity_oracle(&[&b, &c], &[0.0, 1.0]).unwrap();
        assert_eq!(w, c.values().matmul_t(c.values()).unwrap());
        let big = FactorMatrix::new(DenseMatrix::zeros(ORACLE_LIMIT + 1, 1));
        assert!(consensus_affinity_oracle(&[&big], &[1.0]).is_err());
    }
}
