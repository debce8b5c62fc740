//! Shared inputs for the benchmarks.

use mvsc_core::data::synth::SynthConfig;
use mvsc_core::propagate::{prepare_views, Normalization};
use mvsc_core::{FeatureMatrix, MultiViewDataset};

/// Sizes swept by the scaling benchmarks.
pub const SIZES: [usize; 3] = [5_000, 10_000, 20_000];

pub const K: usize = 10;

pub fn dataset(n: usize, views: usize) -> MultiViewDataset {
    SynthConfig::new(n, K, views, 0.1, 7).generate().expect("synthetic data")
}

/// Propagated features, so pipeline benchmarks exclude smoothing.
pub fn smoothed(n: usize, views: usize) -> Vec<FeatureMatrix> {
    prepare_views(&dataset(n, views), Normalization::default(), None).expect("propagation")
}
