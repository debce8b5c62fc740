//! Multi-seed campaigns: per-run JSON and labels, plus an aggregate table.
//!
//! Output layout under the campaign directory:
//!
//! ```text
//! runs/seed_<s>.json     one record per seed
//! runs/seed_<s>.labels   consensus labels, one integer per line
//! aggregate.json
//! aggregate.txt          per-run rows and a mean±std row
//! cache/                 propagated features (datasets only)
//! ```

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mvsc_core::data::io::write_labels;
use mvsc_core::data::SynthConfig;
use mvsc_core::pipeline::StageTiming;
use mvsc_core::propagate::prepare_views;
use mvsc_core::{evaluate, load_dataset, run_on_features, FeatureMatrix, MultiViewDataset, PipelineConfig, Scores};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{core_exit_code, CliError, Result, EXIT_TIMEOUT};

/// A dataset directory, or `synth:n=..,k=..,views=..,noise=..,seed=..`.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Dataset(PathBuf),
    Synth(SynthConfig),
}

impl Input {
    pub fn parse(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("synth:") else {
            return Ok(Input::Dataset(PathBuf::from(s)));
        };
        let mut cfg = SynthConfig::new(1000, 5, 3, 0.1, 0);
        for item in rest.split(',').filter(|t| !t.is_empty()) {
            let bad = || CliError::config(format!("synthetic spec item `{item}` is not `key=value`"));
            let (key, value) = item.split_once('=').ok_or_else(bad)?;
            let int = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "n" => cfg.n = int()?,
                "k" => cfg.k = int()?,
                "views" => cfg.views = int()?,
                "noise" => cfg.noise = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "p" => cfg.propagation_order = int()?,
                "noise_views" => {
                    cfg.noise_views = value.split('+').map(|v| v.parse().map_err(|_| bad())).collect::<Result<_>>()?
                }
                other => return Err(CliError::config(format!("unknown synthetic spec key `{other}`"))),
            }
        }
        Ok(Input::Synth(cfg))
    }

    pub fn describe(&self) -> String {
        match self {
            Input::Dataset(p) => p.display().to_string(),
            Input::Synth(c) => format!(
                "synth:n={},k={},views={},noise={},seed={}",
                c.n, c.k, c.views, c.noise, c.seed
            ),
        }
    }

    pub fn load(&self) -> Result<MultiViewDataset> {
        Ok(match self {
            Input::Dataset(p) => load_dataset(p)?,
            Input::Synth(c) => c.generate()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub input: Input,
    /// Seed-free template; each run sets its own seed.
    pub config: PipelineConfig,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub time_limit: Option<Duration>,
    pub parallel_runs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Timeout,
    Failed,
    /// Not started because an earlier sequential run timed out.
    Skipped,
}

impl RunStatus {
    fn label(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "Timeout",
            RunStatus::Failed => "failed",
            RunStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub exit_code: Option<i32>,
    /// Relative to the campaign directory.
    pub labels_path: Option<String>,
    pub weights: Option<Vec<f64>>,
    pub traces: Option<Vec<f64>>,
    pub stage_ms: Vec<StageTiming>,
    /// Clustering time, excluding propagation.
    pub seconds: Option<f64>,
    pub scores: Option<Scores>,
    pub nonpositive_degrees: Option<usize>,
    pub config_hash: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ca: Option<f64>,
    pub f1: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub seed: u64,
    pub status: RunStatus,
    pub ca: Option<f64>,
    pub f1: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub input: String,
    /// Hash of the configuration with the seed zeroed.
    pub config_hash: String,
    pub propagate_ms: f64,
    pub completed: usize,
    pub rows: Vec<AggregateRow>,
    /// Over completed runs; population standard deviation.
    pub mean: Summary,
    pub std: Summary,
}

/// Hex SHA-256 of the configuration's JSON form.
pub fn config_hash(config: &PipelineConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("record serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Refuses an output directory inside (or equal to) the dataset directory.
fn guard_output(input: &Input, output: &Path) -> Result<()> {
    let Input::Dataset(dir) = input else {
        return Ok(());
    };
    let Ok(dataset) = dir.canonicalize() else {
        return Ok(());
    };
    // the output may not exist yet; resolve its nearest existing ancestor
    let mut probe = output.to_path_buf();
    let mut tail = Vec::new();
    let resolved = loop {
        match probe.canonicalize() {
            Ok(p) => break tail.iter().rev().fold(p, |acc: PathBuf, c| acc.join(c)),
            Err(_) => match (probe.file_name(), probe.parent()) {
                (Some(name), Some(parent)) => {
                    tail.push(name.to_os_string());
                    probe = if parent.as_os_str().is_empty() { PathBuf::from(".") } else { parent.to_path_buf() };
                }
                _ => return Ok(()),
            },
        }
    };
    if resolved.starts_with(&dataset) {
        return Err(CliError::config(format!(
            "output {} lies inside dataset directory {}; datasets are never written to",
            output.display(),
            dir.display()
        )));
    }
    Ok(())
}

enum Outcome {
    Done(Box<mvsc_core::Result<mvsc_core::ClusteringResult>>),
    Timeout,
    Skipped,
}

type Pending = (Instant, mpsc::Receiver<mvsc_core::Result<mvsc_core::ClusteringResult>>);

fn launch(features: &Arc<Vec<FeatureMatrix>>, config: PipelineConfig) -> Pending {
    let (tx, rx) = mpsc::channel();
    let features = Arc::clone(features);
    std::thread::spawn(move || {
        // the receiver is gone after a timeout
        let _ = tx.send(run_on_features(&features, &config));
    });
    (Instant::now(), rx)
}

fn wait(pending: Pending, limit: Option<Duration>) -> Outcome {
    let (start, rx) = pending;
    let got = match limit {
        Some(l) => rx.recv_timeout(l.saturating_sub(start.elapsed())).map_err(|e| match e {
            mpsc::RecvTimeoutError::Timeout => None,
            mpsc::RecvTimeoutError::Disconnected => Some(()),
        }),
        None => rx.recv().map_err(|_| Some(())),
    };
    match got {
        Ok(r) => Outcome::Done(Box::new(r)),
        Err(None) => Outcome::Timeout,
        Err(Some(())) => Outcome::Done(Box::new(Err(mvsc_core::Error::Numeric("run thread panicked".into())))),
    }
}

/// Runs every seed. A timed-out run cannot be stopped, so in sequential mode
/// the remaining seeds are skipped rather than timed against it.
fn execute(spec: &ExperimentSpec, features: &Arc<Vec<FeatureMatrix>>) -> Vec<(PipelineConfig, Outcome)> {
    let configs: Vec<PipelineConfig> = spec
        .seeds
        .iter()
        .map(|&seed| PipelineConfig {
            seed,
            ..spec.config.clone()
        })
        .collect();
    if spec.parallel_runs {
        let pending: Vec<Pending> = configs.iter().map(|c| launch(features, c.clone())).collect();
        return configs.into_iter().zip(pending).map(|(c, p)| (c, wait(p, spec.time_limit))).collect();
    }
    let mut out = Vec::with_capacity(configs.len());
    let mut timed_out = false;
    for c in configs {
        let outcome = if timed_out {
            Outcome::Skipped
        } else {
            wait(launch(features, c.clone()), spec.time_limit)
        };
        timed_out |= matches!(outcome, Outcome::Timeout);
        out.push((c, outcome));
    }
    out
}

fn record(
    config: PipelineConfig,
    outcome: Outcome,
    truth: Option<&[usize]>,
    dir: &Path,
) -> Result<RunRecord> {
    let seed = config.seed;
    let mut rec = RunRecord {
        seed,
        status: RunStatus::Ok,
        error: None,
        exit_code: None,
        labels_path: None,
        weights: None,
        traces: None,
        stage_ms: Vec::new(),
        seconds: None,
        scores: None,
        nonpositive_degrees: None,
        config_hash: config_hash(&config),
        config,
    };
    match outcome {
        Outcome::Skipped => {
            rec.status = RunStatus::Skipped;
            rec.exit_code = Some(EXIT_TIMEOUT);
            rec.error = Some("skipped after an earlier run timed out".into());
        }
        Outcome::Timeout => {
            rec.status = RunStatus::Timeout;
            rec.exit_code = Some(EXIT_TIMEOUT);
            rec.error = Some("time limit exceeded".into());
        }
        Outcome::Done(r) => match *r {
            Err(e) => {
                rec.status = RunStatus::Failed;
                rec.exit_code = Some(core_exit_code(&e));
                rec.error = Some(e.to_string());
            }
            Ok(res) => {
                let rel = format!("runs/seed_{seed}.labels");
                write_labels(res.consensus.labels(), &dir.join(&rel)).map_err(mvsc_core::Error::from)?;
                rec.labels_path = Some(rel);
                rec.seconds = Some(res.total_ms() / 1e3);
                rec.scores = truth.map(|t| evaluate(res.consensus.labels(), t)).transpose()?;
                rec.weights = Some(res.weights.lambdas);
                rec.traces = Some(res.weights.raw_traces);
                rec.nonpositive_degrees = Some(res.nonpositive_degrees);
                rec.stage_ms = res.timings;
            }
        },
    }
    Ok(rec)
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Means over completed runs, in seed order.
pub fn aggregate(input: String, template: &PipelineConfig, propagate_ms: f64, runs: &[RunRecord]) -> Aggregate {
    let rows: Vec<AggregateRow> = runs
        .iter()
        .map(|r| AggregateRow {
            seed: r.seed,
            status: r.status,
            ca: r.scores.map(|s| s.ca),
            f1: r.scores.map(|s| s.f1),
            nmi: r.scores.map(|s| s.nmi),
            ari: r.scores.map(|s| s.ari),
            seconds: r.seconds,
        })
        .collect();
    let column = |f: fn(&AggregateRow) -> Option<f64>| -> Vec<f64> {
        rows.iter().filter(|r| r.status == RunStatus::Ok).filter_map(f).collect()
    };
    let stat = |f: fn(&AggregateRow) -> Option<f64>| mean_std(&column(f));
    let (ca, f1, nmi, ari, secs) = (
        stat(|r| r.ca),
        stat(|r| r.f1),
        stat(|r| r.nmi),
        stat(|r| r.ari),
        stat(|r| r.seconds),
    );
    Aggregate {
        input,
        config_hash: config_hash(&PipelineConfig {
            seed: 0,
            ..template.clone()
        }),
        propagate_ms,
        completed: rows.iter().filter(|r| r.status == RunStatus::Ok).count(),
        rows,
        mean: Summary {
            ca: ca.0,
            f1: f1.0,
            nmi: nmi.0,
            ari: ari.0,
            seconds: secs.0,
        },
        std: Summary {
            ca: ca.1,
            f1: f1.1,
            nmi: nmi.1,
            ari: ari.1,
            seconds: secs.1,
        },
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.2}", 100.0 * x))
}

fn pm(mean: Option<f64>, std: Option<f64>, scale: f64, digits: usize) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{:.*}±{:.*}", digits, scale * m, digits, scale * s),
        _ => "-".into(),
    }
}

/// Metrics in percent, seconds with three decimals.
pub fn render_table(agg: &Aggregate) -> String {
    let mut out = format!("input: {}\nconfig: {}\n", agg.input, &agg.config_hash[..16]);
    out += &format!(
        "{:<10} {:<8} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
        "seed", "status", "CA", "CF1", "NMI", "ARI", "seconds"
    );
    for r in &agg.rows {
        out += &format!(
            "{:<10} {:<8} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
            r.seed,
            r.status.label(),
            pct(r.ca),
            pct(r.f1),
            pct(r.nmi),
            pct(r.ari),
            r.seconds.map_or("-".into(), |s| format!("{s:.3}"))
        );
    }
    let label = if agg.completed == 0 && !agg.rows.is_empty() {
        "Timeout".to_string()
    } else {
        format!("{}/{}", agg.completed, agg.rows.len())
    };
    out += &format!(
        "{:<10} {:<8} {:>14} {:>14} {:>14} {:>14} {:>14}\n",
        "mean±std",
        label,
        pm(agg.mean.ca, agg.std.ca, 100.0, 2),
        pm(agg.mean.f1, agg.std.f1, 100.0, 2),
        pm(agg.mean.nmi, agg.std.nmi, 100.0, 2),
        pm(agg.mean.ari, agg.std.ari, 100.0, 2),
        pm(agg.mean.seconds, agg.std.seconds, 1.0, 3)
    );
    out
}

/// Loads and smooths the input once; propagation is cached under the output
/// directory and timed separately from the runs.
pub fn prepare(spec: &ExperimentSpec) -> Result<(MultiViewDataset, Vec<FeatureMatrix>, f64)> {
    guard_output(&spec.input, &spec.output)?;
    let mut ds = spec.input.load()?;
    for (&v, &p) in &spec.config.propagation {
        ds.set_propagation_order(v, p)?;
    }
    let cache = spec.output.join("cache");
    let t = Instant::now();
    let cache_dir = matches!(spec.input, Input::Dataset(_)).then_some(cache.as_path());
    let features = prepare_views(&ds, spec.config.normalization, cache_dir)?;
    Ok((ds, features, t.elapsed().as_secs_f64() * 1e3))
}

/// Number of distinct labels, for defaulting `k`.
pub fn class_count(labels: &[usize]) -> usize {
    labels.iter().collect::<std::collections::BTreeSet<_>>().len()
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<Aggregate> {
    if spec.seeds.is_empty() {
        return Err(CliError::config("at least one seed is required"));
    }
    spec.config.validate()?;
    let runs_dir = spec.output.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| CliError::io(&runs_dir, e))?;
    let (ds, features, propagate_ms) = prepare(spec)?;
    let features = Arc::new(features);
    let truth = ds.labels();
    let mut records = Vec::new();
    for (config, outcome) in execute(spec, &features) {
        let rec = record(config, outcome, truth, &spec.output)?;
        write_json(&rec, &runs_dir.join(format!("seed_{}.json", rec.seed)))?;
        log::info!("seed {}: {:?}", rec.seed, rec.status);
        records.push(rec);
    }
    let agg = aggregate(spec.input.describe(), &spec.config, propagate_ms, &records);
    write_json(&agg, &spec.output.join("aggregate.json"))?;
    let table = render_table(&agg);
    let path = spec.output.join("aggregate.txt");
    std::fs::write(&path, &table).map_err(|e| CliError::io(&path, e))?;
    let bad: Vec<&RunRecord> = records.iter().filter(|r| r.status != RunStatus::Ok).collect();
    if let Some(first) = bad.first() {
        return Err(CliError::Incomplete {
            failed: bad.len(),
            total: records.len(),
            first: format!("seed {}: {}", first.seed, first.error.as_deref().unwrap_or("")),
            code: first.exit_code.unwrap_or(EXIT_TIMEOUT),
            dir: spec.output.clone(),
        });
    }
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        let Input::Synth(c) = Input::parse("synth:n=200,k=4,views=2,noise=0.2,seed=3,noise_views=1").unwrap() else {
            panic!("expected synth input");
        };
        assert_eq!((c.n, c.k, c.views, c.noise, c.seed), (200, 4, 2, 0.2, 3));
        assert_eq!(c.noise_views, vec![1]);
        assert!(Input::parse("synth:n=x").is_err());
        assert!(Input::parse("synth:q=1").is_err());
        assert_eq!(Input::parse("data/acm").unwrap(), Input::Dataset("data/acm".into()));
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (Some(2.0), Some(1.0)));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn hash_depends_on_config() {
        let a = PipelineConfig::new(3);
        let b = PipelineConfig::new(4);
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
