//! A grid of campaigns over kernels, weight modes and concatenation scales,
//! with one summary row per cell.

use std::path::PathBuf;

use mvsc_core::{ConcatScale, KernelKind, WeightMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::harness::{cmd_run, read_json, Aggregate, ExperimentSpec, Summary};
use crate::settings::weight_mode_name;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub base: ExperimentSpec,
    pub kernels: Vec<KernelKind>,
    pub weight_modes: Vec<WeightMode>,
    pub concat_scales: Vec<ConcatScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub completed: usize,
    pub runs: usize,
    pub mean: Summary,
    pub std: Summary,
    pub error: Option<String>,
}

fn kernel_name(k: KernelKind) -> &'static str {
    match k {
        KernelKind::Quadratic => "quadratic",
        KernelKind::Rbf => "rbf",
        KernelKind::Sigmoid => "sigmoid",
    }
}

fn scale_name(s: ConcatScale) -> &'static str {
    match s {
        ConcatScale::SqrtLambda => "sqrt",
        ConcatScale::Lambda => "linear",
    }
}

/// Runs every cell; a failing cell is recorded and the grid continues.
pub fn cmd_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let mut first_err: Option<CliError> = None;
    for &kernel in &spec.kernels {
        for &mode in &spec.weight_modes {
            for &scale in &spec.concat_scales {
                let name = format!("{}_{}_{}", kernel_name(kernel), weight_mode_name(mode), scale_name(scale));
                let mut cell = spec.base.clone();
                cell.config.kernel.kind = kernel;
                cell.config.weight_mode = mode;
                cell.config.concat_scale = scale;
                cell.output = spec.base.output.join(&name);
                let (agg, error) = match cmd_run(&cell) {
                    Ok(agg) => (Some(agg), None),
                    Err(e) => {
                        // partial campaigns still leave an aggregate behind
                        let agg = read_json::<Aggregate>(&cell.output.join("aggregate.json")).ok();
                        let msg = e.to_string();
                        first_err.get_or_insert(e);
                        (agg, Some(msg))
                    }
                };
                rows.push(BenchRow {
                    name,
                    completed: agg.as_ref().map_or(0, |a| a.completed),
                    runs: spec.base.seeds.len(),
                    mean: agg.as_ref().map(|a| a.mean).unwrap_or_default(),
                    std: agg.as_ref().map(|a| a.std).unwrap_or_default(),
                    error,
                });
            }
        }
    }
    let dir: PathBuf = spec.base.output.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let json = dir.join("summary.json");
    std::fs::write(&json, serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n")
        .map_err(|e| CliError::io(&json, e))?;
    let txt = dir.join("summary.txt");
    std::fs::write(&txt, render(&rows)).map_err(|e| CliError::io(&txt, e))?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

fn pm(mean: Option<f64>, std: Option<f64>, scale: f64, digits: usize) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{:.*}±{:.*}", digits, scale * m, digits, scale * s),
        _ => "-".into(),
    }
}

pub fn render(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<28} {:>5} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
        "config", "runs", "CA", "CF1", "NMI", "ARI", "seconds"
    );
    for r in rows {
        out += &format!(
            "{:<28} {:>5} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
            r.name,
            format!("{}/{}", r.completed, r.runs),
            pm(r.mean.ca, r.std.ca, 100.0, 2),
            pm(r.mean.f1, r.std.f1, 100.0, 2),
            pm(r.mean.nmi, r.std.nmi, 100.0, 2),
            pm(r.mean.ari, r.std.ari, 100.0, 2),
            pm(r.mean.seconds, r.std.seconds, 1.0, 3)
        );
    }
    out
}
