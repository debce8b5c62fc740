//! Run settings gathered from flags and an optional TOML file. Every field is
//! optional so layers can be overlaid: flags over file over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvsc_core::{ConcatScale, KernelKind, Normalization, PipelineConfig, WeightMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_OUTPUT: &str = "results";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub k: Option<usize>,
    pub f: Option<usize>,
    pub temperature: Option<f64>,
    pub kernel: Option<String>,
    pub kernel_components: Option<usize>,
    pub gamma: Option<f64>,
    pub coef0: Option<f64>,
    /// `view:order,...`
    pub p: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub weight_mode: Option<String>,
    pub concat_scale: Option<String>,
    pub normalization: Option<String>,
    /// Seconds per run.
    pub time_limit: Option<f64>,
    pub output: Option<PathBuf>,
    pub parallel_runs: Option<bool>,
    pub no_view_weights: Option<bool>,
    pub negate_traces: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let s: Settings =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        s.resolved_weight_mode()
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        overlay_fields!(
            self,
            top,
            k,
            f,
            temperature,
            kernel,
            kernel_components,
            gamma,
            coef0,
            p,
            seeds,
            weight_mode,
            concat_scale,
            normalization,
            time_limit,
            output,
            parallel_runs,
            no_view_weights,
            negate_traces
        )
    }

    /// Folds the two boolean shortcuts into `weight_mode` within this layer,
    /// so a later layer's `weight_mode` overrides them as a unit.
    pub fn resolved_weight_mode(mut self) -> Result<Self> {
        let mut picks = Vec::new();
        if let Some(m) = &self.weight_mode {
            picks.push(m.parse::<WeightMode>()?);
        }
        if self.no_view_weights == Some(true) {
            picks.push(WeightMode::Uniform);
        }
        if self.negate_traces == Some(true) {
            picks.push(WeightMode::Negated);
        }
        if picks.windows(2).any(|w| w[0] != w[1]) {
            return Err(CliError::config(
                "weight_mode, no_view_weights and negate_traces select different weightings",
            ));
        }
        if let Some(m) = picks.first() {
            self.weight_mode = Some(weight_mode_name(*m).into());
        }
        self.no_view_weights = None;
        self.negate_traces = None;
        Ok(self)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec())
    }

    pub fn output(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    /// The pipeline configuration, with `k` falling back to `default_k`
    /// (the class count of a labelled dataset).
    pub fn pipeline_config(&self, default_k: Option<usize>) -> Result<PipelineConfig> {
        let k = self
            .k
            .or(default_k)
            .ok_or_else(|| CliError::config("k is required when the dataset has no labels"))?;
        let mut c = PipelineConfig::new(k);
        c.f = self.f;
        if let Some(t) = self.temperature {
            c.temperature = t;
        }
        if let Some(kind) = &self.kernel {
            c.kernel.kind = kind.parse::<KernelKind>()?;
        }
        c.kernel.components = self.kernel_components;
        c.kernel.gamma = self.gamma;
        if let Some(c0) = self.coef0 {
            c.kernel.coef0 = c0;
        }
        if let Some(p) = &self.p {
            c.propagation = parse_orders(p)?;
        }
        if let Some(m) = &self.weight_mode {
            c.weight_mode = m.parse()?;
        }
        if let Some(s) = &self.concat_scale {
            c.concat_scale = s.parse::<ConcatScale>()?;
        }
        if let Some(n) = &self.normalization {
            c.normalization = n.parse::<Normalization>()?;
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config(format!("time limit must be positive seconds, got {t}")));
            }
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn weight_mode_name(m: WeightMode) -> &'static str {
    match m {
        WeightMode::Softmax => "softmax",
        WeightMode::Uniform => "uniform",
        WeightMode::Negated => "negated",
    }
}

/// `0:2,1:20` into view → propagation order.
pub fn parse_orders(s: &str) -> Result<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let bad = || CliError::config(format!("propagation order `{item}` is not `view:order`"));
        let (v, p) = item.split_once(':').ok_or_else(bad)?;
        let v: usize = v.trim().parse().map_err(|_| bad())?;
        let p: usize = p.trim().parse().map_err(|_| bad())?;
        if out.insert(v, p).is_some() {
            return Err(CliError::config(format!("view {v} given two propagation orders")));
        }
    }
    Ok(out)
}

/// `0,1,2` or the half-open range `0..5`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::config(format!("seeds `{s}` are not a list `a,b,c` or a range `a..b`"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(CliError::config("at least one seed is required"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::config(format!("seeds `{s}` repeat a value")));
    }
    Ok(seeds)
}
