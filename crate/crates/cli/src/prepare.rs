//! Builds a dataset directory from raw inputs.
//!
//! Features are read either in the binary container format or as a text
//! matrix (one row per line, comma or whitespace separated, `#` comments).
//! Graphs are read either in the container format or as an edge list of
//! 0-based `i j [w]` lines, symmetrized by union.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvsc_core::data::io::{read_features, read_graph, read_labels, MANIFEST};
use mvsc_core::data::build_knn_graph;
use mvsc_core::{save_dataset, DenseMatrix, FeatureMatrix, MultiViewDataset, SparseGraph, View};

use crate::error::{CliError, Result};

/// Propagation order for views that carry a graph.
pub const DEFAULT_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewInput {
    pub features: PathBuf,
    pub graph: Option<PathBuf>,
}

impl ViewInput {
    /// `FEATURES[:GRAPH]`.
    pub fn parse(s: &str) -> Self {
        match s.split_once(':') {
            Some((f, g)) if !g.is_empty() => ViewInput {
                features: f.into(),
                graph: Some(g.into()),
            },
            _ => ViewInput {
                features: s.trim_end_matches(':').into(),
                graph: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrepareSpec {
    pub views: Vec<ViewInput>,
    pub labels: Option<PathBuf>,
    /// Overrides per view index. Defaults: 2 with a graph, 0 without.
    pub orders: BTreeMap<usize, usize>,
    /// Appends a view of the first view's features over a k-NN graph.
    pub add_knn: Option<usize>,
    pub self_loops: bool,
    pub output: PathBuf,
}

fn starts_with(path: &Path, prefix: &[u8]) -> Result<bool> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut head = vec![0u8; prefix.len()];
    let got = f.read(&mut head).map_err(|e| CliError::io(path, e))?;
    Ok(got == prefix.len() && head == prefix)
}

fn data_err(path: &Path, line: usize, detail: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}:{line}: {detail}", path.display()))
}

pub fn read_feature_input(path: &Path) -> Result<FeatureMatrix> {
    if starts_with(path, b"n ")? {
        return Ok(read_features(path).map_err(mvsc_core::Error::from)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| data_err(path, k + 1, format!("`{s}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(data_err(path, k + 1, format!("{} columns, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no feature rows", path.display())));
    }
    let m = DenseMatrix::from_rows(&rows);
    FeatureMatrix::new(m).map_err(|_| CliError::Data(format!("{}: non-finite feature value", path.display())))
}

pub fn read_graph_input(path: &Path, n: usize) -> Result<SparseGraph> {
    if starts_with(path, b"n ")? {
        return Ok(read_graph(path).map_err(mvsc_core::Error::from)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut edges = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = t.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if !(2..=3).contains(&tok.len()) {
            return Err(data_err(path, k + 1, "expected `i j [w]`"));
        }
        let idx = |s: &str| {
            let i: usize = s.parse().map_err(|_| data_err(path, k + 1, format!("`{s}` is not a node index")))?;
            if i >= n {
                return Err(data_err(path, k + 1, format!("node {i} out of range for n = {n} rows of features")));
            }
            Ok(i)
        };
        let (i, j) = (idx(tok[0])?, idx(tok[1])?);
        let w = match tok.get(2) {
            Some(s) => s.parse().map_err(|_| data_err(path, k + 1, format!("`{s}` is not a weight")))?,
            None => 1.0,
        };
        edges.push((i, j, w));
    }
    SparseGraph::symmetrized_union(n, edges).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_prepare(spec: &PrepareSpec) -> Result<MultiViewDataset> {
    if spec.views.is_empty() {
        return Err(CliError::config("at least one --view is required"));
    }
    if spec.output.join(MANIFEST).exists() {
        return Err(CliError::config(format!(
            "{} already holds a dataset; choose a new output directory",
            spec.output.display()
        )));
    }
    let extra = usize::from(spec.add_knn.is_some());
    if let Some((&v, _)) = spec.orders.range(spec.views.len() + extra..).next() {
        return Err(CliError::config(format!("propagation order given for view {v}, which does not exist")));
    }
    let mut views = Vec::new();
    let mut n_source: Option<(usize, &Path)> = None;
    for (v, input) in spec.views.iter().enumerate() {
        let features = read_feature_input(&input.features)?;
        if let Some((n, first)) = n_source {
            if features.n() != n {
                return Err(CliError::Data(format!(
                    "{} has {} rows but {} has {n}",
                    input.features.display(),
                    features.n(),
                    first.display()
                )));
            }
        } else {
            n_source = Some((features.n(), &input.features));
        }
        let graph = match &input.graph {
            Some(g) => {
                let graph = read_graph_input(g, features.n())?;
                if graph.n() != features.n() {
                    return Err(CliError::Data(format!(
                        "{} has {} nodes but {} has {} rows",
                        g.display(),
                        graph.n(),
                        input.features.display(),
                        features.n()
                    )));
                }
                Some(graph)
            }
            None => None,
        };
        let p = spec
            .orders
            .get(&v)
            .copied()
            .unwrap_or(if graph.is_some() { DEFAULT_ORDER } else { 0 });
        views.push(View::new(features, graph, p));
    }
    if let Some(k) = spec.add_knn {
        let features = views[0].features.clone();
        let graph = build_knn_graph(&features, k, spec.self_loops)?;
        let p = spec.orders.get(&views.len()).copied().unwrap_or(DEFAULT_ORDER);
        views.push(View::new(features, Some(graph), p));
    }
    let labels = match &spec.labels {
        Some(path) => {
            let l = read_labels(path).map_err(mvsc_core::Error::from)?;
            let n = views[0].n();
            if l.len() != n {
                return Err(CliError::Data(format!(
                    "{} has {} labels but {} has {n} rows",
                    path.display(),
                    l.len(),
                    spec.views[0].features.display()
                )));
            }
            Some(l)
        }
        None => None,
    };
    let ds = MultiViewDataset::new(views, labels)?;
    std::fs::create_dir_all(&spec.output).map_err(|e| CliError::io(&spec.output, e))?;
    save_dataset(&ds, &spec.output)?;
    Ok(ds)
}
