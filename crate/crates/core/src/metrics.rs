//! External clustering metrics: accuracy under the best one-to-one matching,
//! macro F1 after that matching, NMI and ARI.
//!
//! All functions take raw label slices; labels need not be contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster-by-class counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[p][t]`: points in predicted cluster `p` and true class `t`.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

fn relabel(raw: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = raw
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::dim(format!(
                "{} predicted labels vs {} true labels",
                pred.len(),
                truth.len()
            )));
        }
        let (p, kp) = relabel(pred);
        let (t, kt) = relabel(truth);
        let mut counts = vec![vec![0u64; kt]; kp];
        for (a, b) in p.iter().zip(&t) {
            counts[*a][*b] += 1;
        }
        Ok(Self {
            counts,
            n: pred.len() as u64,
        })
    }

    pub fn k_pred(&self) -> usize {
        self.counts.len()
    }

    pub fn k_true(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn pred_sizes(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn true_sizes(&self) -> Vec<u64> {
        (0..self.k_true()).map(|t| self.counts.iter().map(|r| r[t]).sum()).collect()
    }

    /// Predicted cluster matched to each true class (None when there are
    /// fewer clusters than classes), maximizing the matched total.
    pub fn best_matching(&self) -> Vec<Option<usize>> {
        let (kp, kt) = (self.k_pred(), self.k_true());
        let size = kp.max(kt);
        let top = self.counts.iter().flatten().copied().max().unwrap_or(0) as f64;
        let mut cost = vec![vec![top; size]; size];
        for p in 0..kp {
            for t in 0..kt {
                cost[p][t] = top - self.counts[p][t] as f64;
            }
        }
        let row_to_col = hungarian(&cost);
        let mut matched = vec![None; kt];
        for (p, &t) in row_to_col.iter().enumerate() {
            if p < kp && t < kt {
                matched[t] = Some(p);
            }
        }
        matched
    }
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n³)). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays, column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Fraction of points whose cluster maps to their class under the best
/// one-to-one cluster/class matching.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Ok(1.0);
    }
    let hits: u64 = table
        .best_matching()
        .iter()
        .enumerate()
        .filter_map(|(t, p)| p.map(|p| table.counts[p][t]))
        .sum();
    Ok(hits as f64 / table.n as f64)
}

/// F1 per true class against its matched cluster, averaged over classes.
pub fn macro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Ok(1.0);
    }
    let ps = table.pred_sizes();
    let ts = table.true_sizes();
    let matching = table.best_matching();
    let total: f64 = matching
        .iter()
        .enumerate()
        .map(|(t, p)| match p {
            Some(p) => 2.0 * table.counts[*p][t] as f64 / (ps[*p] + ts[t]) as f64,
            None => 0.0,
        })
        .sum();
    Ok(total / ts.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    /// `I / ((H(U) + H(V)) / 2)`.
    #[default]
    Arithmetic,
    /// `I / max(H(U), H(V))`.
    Max,
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Ok(1.0);
    }
    let n = table.n as f64;
    let ps = table.pred_sizes();
    let ts = table.true_sizes();
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (ps[p] as f64 * ts[t] as f64)).ln();
            }
        }
    }
    let (hu, hv) = (entropy(&ps, n), entropy(&ts, n));
    if hu == 0.0 && hv == 0.0 {
        // both partitions are a single block
        return Ok(1.0);
    }
    let denom = match norm {
        NmiNormalization::Arithmetic => 0.5 * (hu + hv),
        NmiNormalization::Max => hu.max(hv),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiNormalization::Arithmetic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AriScore {
    pub value: f64,
    /// Truth has a single class, or the chance adjustment is undefined;
    /// `value` is then 0.
    pub degenerate: bool,
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

pub fn ari_score(pred: &[usize], truth: &[usize]) -> Result<AriScore> {
    let table = ContingencyTable::new(pred, truth)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let a: f64 = table.pred_sizes().into_iter().map(choose2).sum();
    let b: f64 = table.true_sizes().into_iter().map(choose2).sum();
    let pairs = choose2(table.n);
    let classes = table.true_sizes().iter().filter(|&&s| s > 0).count();
    if pairs == 0.0 || classes < 2 {
        return Ok(AriScore {
            value: 0.0,
            degenerate: true,
        });
    }
    let expected = a * b / pairs;
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(AriScore {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(AriScore {
        value: (index - expected) / (max - expected),
        degenerate: false,
    })
}

pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    ari_score(pred, truth).map(|s| s.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ca: f64,
    pub f1: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<Scores> {
    Ok(Scores {
        ca: clustering_accuracy(pred, truth)?,
        f1: macro_f1(pred, truth)?,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
    })
}
