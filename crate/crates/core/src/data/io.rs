//! On-disk dataset container.
//!
//! A dataset is a directory holding a manifest (`dataset.txt`) plus one file per
//! graph, feature matrix and label vector:
//!
//! ```text
//! # dataset.txt
//! view 0 graph view0.graph features view0.feat p 2
//! view 1 graph none features view1.feat p 2 graph_from 0
//! labels labels.txt
//! ```
//!
//! Graph files are text: a header `n <n> nnz <nnz> symmetric <0|1>` followed by
//! one 0-based `i j w` triple per line (symmetric graphs list both directions).
//! Feature files carry a text header line `n <n> d <d> dtype f64` followed by
//! `n*d` little-endian f64 values in row-major order. Label files hold one
//! integer per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::dataset::{FeatureMatrix, MultiViewDataset, View};
use super::graph::SparseGraph;
use crate::dense::DenseMatrix;
use crate::error::{DataError, Error, GraphError, Result};

pub const MANIFEST: &str = "dataset.txt";

type DataResult<T> = std::result::Result<T, DataError>;

fn open(path: &Path) -> DataResult<File> {
    File::open(path).map_err(|e| DataError::io(path, e))
}

fn create(path: &Path) -> DataResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DataError::io(path, e))
}

fn header_err(path: &Path, detail: impl Into<String>) -> DataError {
    DataError::MalformedHeader {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Parses `key value key value ...` against an expected key sequence.
fn parse_header<'a>(path: &Path, line: &'a str, keys: &[&str]) -> DataResult<Vec<&'a str>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != keys.len() * 2 {
        return Err(header_err(path, format!("expected `{}`", keys.join(" <> "))));
    }
    keys.iter()
        .zip(tokens.chunks(2))
        .map(|(k, kv)| {
            if kv[0] == *k {
                Ok(kv[1])
            } else {
                Err(header_err(path, format!("expected key `{k}`, found `{}`", kv[0])))
            }
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(path: &Path, key: &str, s: &str) -> DataResult<T> {
    s.parse()
        .map_err(|_| header_err(path, format!("`{key}` value `{s}` is not a valid number")))
}

pub fn read_graph(path: &Path) -> DataResult<SparseGraph> {
    let mut lines = BufReader::new(open(path)?).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| DataError::io(path, e))?,
        None => return Err(header_err(path, "empty file")),
    };
    let h = parse_header(path, &header, &["n", "nnz", "symmetric"])?;
    let n: usize = parse_num(path, "n", h[0])?;
    let nnz: usize = parse_num(path, "nnz", h[1])?;
    let symmetric = match h[2] {
        "0" => false,
        "1" => true,
        other => return Err(header_err(path, format!("`symmetric` must be 0 or 1, found `{other}`"))),
    };
    let mut edges = Vec::with_capacity(nnz);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: &str| DataError::MalformedRecord {
            path: path.to_path_buf(),
            line: lineno,
            detail: detail.to_string(),
        };
        let mut it = line.split_whitespace();
        let (Some(i), Some(j), Some(w), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad("expected `i j w`"));
        };
        let i: usize = i.parse().map_err(|_| bad("row index is not an integer"))?;
        let j: usize = j.parse().map_err(|_| bad("column index is not an integer"))?;
        let w: f64 = w.parse().map_err(|_| bad("weight is not a number"))?;
        for index in [i, j] {
            if index >= n {
                return Err(DataError::IndexOutOfRange {
                    path: path.to_path_buf(),
                    index,
                    n,
                });
            }
        }
        edges.push((i, j, w));
    }
    if edges.len() != nnz {
        return Err(header_err(path, format!("header declares nnz {nnz}, file has {} entries", edges.len())));
    }
    SparseGraph::from_edges(n, edges, symmetric).map_err(|e| match e {
        GraphError::IndexOutOfRange { row, col, n } => DataError::IndexOutOfRange {
            path: path.to_path_buf(),
            index: row.max(col),
            n,
        },
        other => DataError::Invalid {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })
}

pub fn write_graph(graph: &SparseGraph, path: &Path) -> DataResult<()> {
    let mut w = create(path)?;
    let io = |e| DataError::io(path, e);
    writeln!(
        w,
        "n {} nnz {} symmetric {}",
        graph.n(),
        graph.nnz(),
        u8::from(graph.is_symmetric())
    )
    .map_err(io)?;
    for (i, j, wt) in graph.edges() {
        writeln!(w, "{i} {j} {wt}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_features(path: &Path) -> DataResult<FeatureMatrix> {
    let mut r = BufReader::new(open(path)?);
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header).map_err(|e| DataError::io(path, e))?;
    let header = std::str::from_utf8(&header).map_err(|_| header_err(path, "header is not utf-8"))?;
    let h = parse_header(path, header.trim_end(), &["n", "d", "dtype"])?;
    let n: usize = parse_num(path, "n", h[0])?;
    let d: usize = parse_num(path, "d", h[1])?;
    if h[2] != "f64" {
        return Err(header_err(path, format!("unsupported dtype `{}`", h[2])));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| DataError::io(path, e))?;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| header_err(path, "n*d overflows"))?;
    if bytes.len() != expected {
        return Err(DataError::Invalid {
            path: path.to_path_buf(),
            detail: format!("payload has {} bytes, header implies {expected}", bytes.len()),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let m = DenseMatrix::from_vec(n, d, values).expect("length checked");
    FeatureMatrix::new(m).map_err(|_| DataError::Invalid {
        path: path.to_path_buf(),
        detail: "non-finite feature value".into(),
    })
}

pub fn write_features(features: &DenseMatrix, path: &Path) -> DataResult<()> {
    let mut w = create(path)?;
    let io = |e| DataError::io(path, e);
    writeln!(w, "n {} d {} dtype f64", features.rows(), features.cols()).map_err(io)?;
    for v in features.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_labels(path: &Path) -> DataResult<Vec<usize>> {
    let r = BufReader::new(open(path)?);
    let mut labels = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse().map_err(|_| DataError::MalformedRecord {
            path: path.to_path_buf(),
            line: k + 1,
            detail: format!("`{t}` is not a nonnegative integer"),
        })?);
    }
    Ok(labels)
}

pub fn write_labels(labels: &[usize], path: &Path) -> DataResult<()> {
    let mut w = create(path)?;
    let io = |e| DataError::io(path, e);
    for l in labels {
        writeln!(w, "{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
struct ViewEntry {
    graph: Option<String>,
    features: String,
    p: usize,
    graph_from: Option<usize>,
}

#[derive(Debug, Default)]
struct Manifest {
    views: Vec<(usize, ViewEntry)>,
    labels: Option<String>,
}

fn parse_manifest(path: &Path) -> DataResult<Manifest> {
    let r = BufReader::new(open(path)?);
    let mut m = Manifest::default();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |detail: String| DataError::MalformedRecord {
            path: path.to_path_buf(),
            line: k + 1,
            detail,
        };
        let tok: Vec<&str> = t.split_whitespace().collect();
        match tok[0] {
            "labels" if tok.len() == 2 => m.labels = Some(tok[1].to_string()),
            "view" => {
                let fixed = ["graph", "features", "p"];
                let ok_len = tok.len() == 8 || (tok.len() == 10 && tok[8] == "graph_from");
                if !ok_len || fixed.iter().enumerate().any(|(i, key)| tok[2 + 2 * i] != *key) {
                    return Err(bad(
                        "expected `view <idx> graph <file|none> features <file> p <int> [graph_from <idx>]`".into(),
                    ));
                }
                let idx: usize = tok[1].parse().map_err(|_| bad("view index is not an integer".into()))?;
                let p: usize = tok[7].parse().map_err(|_| bad("p is not a nonnegative integer".into()))?;
                let graph_from = match tok.get(9) {
                    Some(s) => Some(s.parse().map_err(|_| bad("graph_from is not an integer".into()))?),
                    None => None,
                };
                let graph = (tok[3] != "none").then(|| tok[3].to_string());
                m.views.push((
                    idx,
                    ViewEntry {
                        graph,
                        features: tok[5].to_string(),
                        p,
                        graph_from,
                    },
                ));
            }
            other => return Err(bad(format!("unknown directive `{other}`"))),
        }
    }
    m.views.sort_by_key(|(i, _)| *i);
    for (expect, (idx, _)) in m.views.iter().enumerate() {
        if *idx != expect {
            return Err(DataError::Invalid {
                path: path.to_path_buf(),
                detail: format!("view indices must be 0..V without gaps; found {idx} at position {expect}"),
            });
        }
    }
    if m.views.is_empty() {
        return Err(DataError::Invalid {
            path: path.to_path_buf(),
            detail: "manifest lists no views".into(),
        });
    }
    Ok(m)
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let manifest_path = dir.join(MANIFEST);
    let manifest = parse_manifest(&manifest_path)?;
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut n_ref: Option<(usize, PathBuf)> = None;
    for (v, entry) in &manifest.views {
        let fpath = dir.join(&entry.features);
        let features = read_features(&fpath)?;
        match &n_ref {
            Some((n, _)) if *n != features.n() => {
                return Err(DataError::SizeMismatch {
                    path: fpath,
                    expected: *n,
                    found: features.n(),
                }
                .into())
            }
            None => n_ref = Some((features.n(), fpath.clone())),
            _ => {}
        }
        let graph = match &entry.graph {
            Some(g) => {
                let gpath = dir.join(g);
                let graph = read_graph(&gpath)?;
                if graph.n() != features.n() {
                    return Err(DataError::SizeMismatch {
                        path: gpath,
                        expected: features.n(),
                        found: graph.n(),
                    }
                    .into());
                }
                Some(graph)
            }
            None => None,
        };
        if let Some(src) = entry.graph_from {
            let has_graph = manifest.views.get(src).is_some_and(|(_, e)| e.graph.is_some());
            if !has_graph {
                return Err(DataError::Invalid {
                    path: manifest_path.clone(),
                    detail: format!("view {v} names graph_from {src}, which has no graph"),
                }
                .into());
            }
        }
        let mut view = View::new(features, graph, entry.p);
        view.graph_from = entry.graph_from;
        views.push(view);
    }
    let labels = match &manifest.labels {
        Some(l) => {
            let lpath = dir.join(l);
            let labels = read_labels(&lpath)?;
            let n = views[0].n();
            if labels.len() != n {
                return Err(DataError::SizeMismatch {
                    path: lpath,
                    expected: n,
                    found: labels.len(),
                }
                .into());
            }
            Some(labels)
        }
        None => None,
    };
    MultiViewDataset::new(views, labels).map_err(|e| match e {
        Error::Dimension(detail) | Error::Config(detail) => DataError::Invalid {
            path: manifest_path,
            detail,
        }
        .into(),
        other => other,
    })
}

/// Writes `dataset` into `dir` (created if needed) in the container format.
pub fn save_dataset(dataset: &MultiViewDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    let mut manifest = String::new();
    for (v, view) in dataset.views().iter().enumerate() {
        let fname = format!("view{v}.feat");
        write_features(view.features.matrix(), &dir.join(&fname))?;
        let gname = match &view.graph {
            Some(g) => {
                let gname = format!("view{v}.graph");
                write_graph(g, &dir.join(&gname))?;
                gname
            }
            None => "none".to_string(),
        };
        manifest.push_str(&format!(
            "view {v} graph {gname} features {fname} p {}",
            view.propagation_order
        ));
        if let Some(src) = view.graph_from {
            manifest.push_str(&format!(" graph_from {src}"));
        }
        manifest.push('\n');
    }
    if let Some(labels) = dataset.labels() {
        write_labels(labels, &dir.join("labels.txt"))?;
        manifest.push_str("labels labels.txt\n");
    }
    std::fs::write(&manifest_path, manifest).map_err(|e| DataError::io(&manifest_path, e))?;
    Ok(())
}
