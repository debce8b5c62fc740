//! Argument parsing and dispatch for the `mvsc` binary.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{cmd_bench, BenchSpec};
use crate::error::{CliError, Result, EXIT_CONFIG, EXIT_OK};
use crate::eval::{cmd_eval, render};
use crate::harness::{class_count, cmd_run, render_table, ExperimentSpec, Input};
use crate::prepare::{cmd_prepare, PrepareSpec, ViewInput};
use crate::settings::{parse_orders, parse_seeds, Settings};

#[derive(Debug, Parser)]
#[command(name = "mvsc", version, about = "Scalable multi-view subspace clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset directory from feature, graph and label files
    Prepare(PrepareArgs),
    /// Cluster a dataset over several seeds and tabulate the results
    Run(RunArgs),
    /// Run a grid of kernels, weight modes and concatenation scales
    Bench(BenchArgs),
    /// Score label files against ground truth
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// FEATURES[:GRAPH]; repeat for more views
    #[arg(long = "view", required = true)]
    pub views: Vec<String>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Propagation orders, `view:order,...`
    #[arg(long)]
    pub p: Option<String>,
    /// Append a view over a K-nearest-neighbor graph of the first view's features
    #[arg(long, value_name = "K")]
    pub add_knn: Option<usize>,
    #[arg(long, requires = "add_knn")]
    pub self_loops: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// TOML file with any of the settings below; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clusters; defaults to the number of label classes
    #[arg(long)]
    pub k: Option<usize>,
    /// Singular vectors per view; defaults to k
    #[arg(long)]
    pub f: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_parser = ["quadratic", "rbf", "sigmoid"])]
    pub kernel: Option<String>,
    /// Nystroem landmarks for rbf and sigmoid; defaults to 10k
    #[arg(long)]
    pub kernel_components: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub coef0: Option<f64>,
    /// Propagation order overrides, `view:order,...`
    #[arg(long)]
    pub p: Option<String>,
    /// `0,1,2` or `0..5`
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, value_parser = ["softmax", "uniform", "negated"])]
    pub weight_mode: Option<String>,
    #[arg(long, value_parser = ["sqrt", "linear"])]
    pub concat_scale: Option<String>,
    #[arg(long, value_parser = ["sym_selfloop", "sym", "row"])]
    pub normalization: Option<String>,
    /// Seconds per run
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub parallel_runs: bool,
    /// Same as --weight-mode uniform
    #[arg(long)]
    pub no_view_weights: bool,
    /// Same as --weight-mode negated
    #[arg(long)]
    pub negate_traces: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset directory, or `synth:n=..,k=..,views=..,noise=..,seed=..`
    pub input: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub input: String,
    #[arg(long, value_delimiter = ',', default_value = "quadratic,rbf,sigmoid")]
    pub kernels: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "softmax")]
    pub weight_modes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "sqrt")]
    pub concat_scales: Vec<String>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Label file or dataset directory
    #[arg(long)]
    pub truth: PathBuf,
    /// Label files or run output directories
    #[arg(required = true)]
    pub pred: Vec<PathBuf>,
    /// Also write the scores as JSON here
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl PipelineArgs {
    fn flag_layer(&self) -> Result<Settings> {
        Settings {
            k: self.k,
            f: self.f,
            temperature: self.temperature,
            kernel: self.kernel.clone(),
            kernel_components: self.kernel_components,
            gamma: self.gamma,
            coef0: self.coef0,
            p: self.p.clone(),
            seeds: self.seeds.as_deref().map(parse_seeds).transpose()?,
            weight_mode: self.weight_mode.clone(),
            concat_scale: self.concat_scale.clone(),
            normalization: self.normalization.clone(),
            time_limit: self.time_limit,
            output: self.output.clone(),
            parallel_runs: self.parallel_runs.then_some(true),
            no_view_weights: self.no_view_weights.then_some(true),
            negate_traces: self.negate_traces.then_some(true),
        }
        .resolved_weight_mode()
    }

    /// Flags over config file over defaults.
    pub fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        Ok(file.overlay(self.flag_layer()?))
    }
}

/// Resolves the settings against the input into a campaign.
pub fn experiment(input: &str, args: &PipelineArgs) -> Result<ExperimentSpec> {
    let settings = args.settings()?;
    let input = Input::parse(input)?;
    // k defaults to the class count of a labelled dataset
    let default_k = match &input {
        _ if settings.k.is_some() => None,
        Input::Synth(c) => Some(c.k),
        Input::Dataset(dir) => mvsc_core::load_dataset(dir)?.labels().map(class_count),
    };
    Ok(ExperimentSpec {
        input,
        config: settings.pipeline_config(default_k)?,
        seeds: settings.seeds(),
        output: settings.output(),
        time_limit: settings.time_limit.map(Duration::from_secs_f64),
        parallel_runs: settings.parallel_runs.unwrap_or(false),
    })
}

fn parse_list<T: std::str::FromStr<Err = mvsc_core::Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse().map_err(CliError::from)).collect()
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => {
            let spec = PrepareSpec {
                views: a.views.iter().map(|v| ViewInput::parse(v)).collect(),
                labels: a.labels,
                orders: a.p.as_deref().map(parse_orders).transpose()?.unwrap_or_default(),
                add_knn: a.add_knn,
                self_loops: a.self_loops,
                output: a.output,
            };
            let ds = cmd_prepare(&spec)?;
            println!(
                "wrote {} views of {} nodes to {}",
                ds.view_count(),
                ds.n(),
                spec.output.display()
            );
            Ok(())
        }
        Command::Run(a) => {
            let spec = experiment(&a.input, &a.pipeline)?;
            match cmd_run(&spec) {
                Ok(agg) => {
                    print!("{}", render_table(&agg));
                    Ok(())
                }
                Err(e) => {
                    // incomplete campaigns still wrote their table
                    if matches!(e, CliError::Incomplete { .. }) {
                        if let Ok(table) = std::fs::read_to_string(spec.output.join("aggregate.txt")) {
                            print!("{table}");
                        }
                    }
                    Err(e)
                }
            }
        }
        Command::Bench(a) => {
            let base = experiment(&a.input, &a.pipeline)?;
            let spec = BenchSpec {
                kernels: parse_list(&a.kernels)?,
                weight_modes: parse_list(&a.weight_modes)?,
                concat_scales: parse_list(&a.concat_scales)?,
                base,
            };
            let result = cmd_bench(&spec);
            // written even when a cell fails, unless the grid never started
            if let Ok(table) = std::fs::read_to_string(spec.base.output.join("summary.txt")) {
                print!("{table}");
            }
            result.map(|_| ())
        }
        Command::Eval(a) => {
            let rows = cmd_eval(&a.truth, &a.pred)?;
            print!("{}", render(&rows));
            if let Some(path) = a.output {
                let text = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
