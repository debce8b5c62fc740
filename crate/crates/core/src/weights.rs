//! View weights from per-view clusterability traces.
//!
//! For a view with normalized factor `B` and partition indicator `G`, the
//! trace `Tr(Gᵀ(I − BBᵀ)G)` equals `n − ‖BᵀG‖²_F` because every row of `G`
//! holds a single one. Weights are a temperature softmax over the traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::Partition;
use crate::spectral::FactorMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `softmax(trace / T)`: larger traces get larger weights.
    #[default]
    Softmax,
    /// Every view weighted `1 / V`.
    Uniform,
    /// `softmax(-trace / T)`: the most clusterable view gets the largest weight.
    Negated,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(Self::Softmax),
            "uniform" => Ok(Self::Uniform),
            "negated" | "negated_softmax" => Ok(Self::Negated),
            other => Err(Error::config(format!("unknown weight mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewWeights {
    /// Nonnegative, summing to one. Entries can underflow to exactly zero at
    /// low temperature.
    pub lambdas: Vec<f64>,
    pub temperature: f64,
    pub raw_traces: Vec<f64>,
}

/// `n − ‖BᵀG‖²_F`, i.e. `Tr(Gᵀ(I − BBᵀ)G)` without forming `BBᵀ`.
pub fn clusterability_trace(b: &FactorMatrix, g: &Partition) -> Result<f64> {
    if b.n() != g.n() {
        return Err(Error::dim(format!("factor has {} rows, partition {} points", b.n(), g.n())));
    }
    let m = b.m();
    // column sums of B restricted to each cluster: (BᵀG)ᵀ, k x m
    let mut sums = vec![0.0; g.k() * m];
    for (i, &l) in g.labels().iter().enumerate() {
        for (s, v) in sums[l * m..(l + 1) * m].iter_mut().zip(b.values().row(i)) {
            *s += v;
        }
    }
    let within: f64 = sums.iter().map(|v| v * v).sum();
    Ok(g.n() as f64 - within)
}

/// Max-shifted softmax of `traces / temperature`.
pub fn softmax_weights(traces: &[f64], temperature: f64) -> Result<ViewWeights> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::config(format!("temperature must be positive, got {temperature}")));
    }
    if traces.is_empty() {
        return Err(Error::config("no views to weight"));
    }
    if traces.iter().any(|t| !t.is_finite()) {
        return Err(Error::numeric("non-finite clusterability trace"));
    }
    let top = traces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = traces.iter().map(|t| ((t - top) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ViewWeights {
        lambdas: exps.iter().map(|e| e / total).collect(),
        temperature,
        raw_traces: traces.to_vec(),
    })
}

/// Weights under `mode`; `raw_traces` always holds the unnegated traces.
pub fn view_weights(traces: &[f64], temperature: f64, mode: WeightMode) -> Result<ViewWeights> {
    match mode {
        WeightMode::Softmax => softmax_weights(traces, temperature),
        WeightMode::Negated => {
            let neg: Vec<f64> = traces.iter().map(|t| -t).collect();
            let mut w = softmax_weights(&neg, temperature)?;
            w.raw_traces = traces.to_vec();
            Ok(w)
        }
        WeightMode::Uniform => {
            // validate the same way the other modes do
            softmax_weights(traces, temperature)?;
            let v = traces.len() as f64;
            Ok(ViewWeights {
                lambdas: vec![1.0 / v; traces.len()],
                temperature,
                raw_traces: traces.to_vec(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;

    #[test]
    fn identity_affinity_has_zero_trace() {
        let b = FactorMatrix::new(DenseMatrix::identity(5));
        let g = Partition::new(vec![0, 1, 1, 0, 2], 3).unwrap();
        assert_eq!(clusterability_trace(&b, &g).unwrap(), 0.0);
    }

    #[test]
    fn zero_affinity_has_trace_n() {
        let b = FactorMatrix::new(DenseMatrix::zeros(6, 3));
        let g = Partition::new(vec![0, 1, 1, 0, 1, 0], 2).unwrap();
        assert_eq!(clusterability_trace(&b, &g).unwrap(), 6.0);
    }

    #[test]
    fn trace_dimension_mismatch() {
        let b = FactorMatrix::new(DenseMatrix::zeros(4, 3));
        let g = Partition::new(vec![0, 1], 2).unwrap();
        assert!(clusterability_trace(&b, &g).is_err());
    }

    #[test]
    fn equal_traces_give_uniform_weights() {
        let w = softmax_weights(&[3.5, 3.5, 3.5, 3.5], 0.1).unwrap();
        for l in w.lambdas {
            assert!((l - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_gap_does_not_overflow() {
        let w = softmax_weights(&[0.0, 1000.0], 0.1).unwrap();
        assert!(w.lambdas[0] < 1e-30);
        assert!((w.lambdas[1] - 1.0).abs() < 1e-30);
    }

    #[test]
    fn matches_extended_precision_softmax() {
        // softmax([1, 2, 3]) evaluated with 50-digit arithmetic
        let expected = [
            0.090_030_573_170_380_458,
            0.244_728_471_054_797_652,
            0.665_240_955_774_821_890,
        ];
        let w = softmax_weights(&[1.0, 2.0, 3.0], 1.0).unwrap();
        for (a, b) in w.lambdas.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(softmax_weights(&[1.0], 0.0).is_err());
        assert!(softmax_weights(&[1.0], -1.0).is_err());
        assert!(view_weights(&[1.0], 0.0, WeightMode::Uniform).is_err());
    }

    #[test]
    fn negated_prefers_small_traces() {
        let w = view_weights(&[1.0, 5.0], 1.0, WeightMode::Negated).unwrap();
        assert!(w.lambdas[0] > w.lambdas[1]);
        assert_eq!(w.raw_traces, vec![1.0, 5.0]);
        let s = view_weights(&[1.0, 5.0], 1.0, WeightMode::Softmax).unwrap();
        assert!(s.lambdas[0] < s.lambdas[1]);
        let u = view_weights(&[1.0, 5.0], 1.0, WeightMode::Uniform).unwrap();
        assert_eq!(u.lambdas, vec![0.5, 0.5]);
    }
}
