//! Scores label files against ground truth.

use std::path::{Path, PathBuf};

use mvsc_core::data::io::{read_labels, MANIFEST};
use mvsc_core::{evaluate, load_dataset, Scores};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub path: PathBuf,
    pub scores: Scores,
}

fn labels_of(path: &Path) -> Result<Vec<usize>> {
    Ok(read_labels(path).map_err(mvsc_core::Error::from)?)
}

/// Truth from a label file or a dataset directory's labels.
pub fn read_truth(path: &Path) -> Result<Vec<usize>> {
    if path.join(MANIFEST).is_file() {
        let ds = load_dataset(path)?;
        return ds
            .labels()
            .map(<[usize]>::to_vec)
            .ok_or_else(|| CliError::Data(format!("{} has no labels", path.display())));
    }
    labels_of(path)
}

/// Label files named directly, or every `runs/*.labels` of a campaign.
fn expand(pred: &Path) -> Result<Vec<PathBuf>> {
    let runs = pred.join("runs");
    if !runs.is_dir() {
        return Ok(vec![pred.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&runs)
        .map_err(|e| CliError::io(&runs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "labels"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_eval(truth: &Path, preds: &[PathBuf]) -> Result<Vec<EvalRow>> {
    let truth = read_truth(truth)?;
    let mut rows = Vec::new();
    for pred in preds {
        for path in expand(pred)? {
            let labels = labels_of(&path)?;
            if labels.len() != truth.len() {
                return Err(CliError::Data(format!(
                    "{} has {} labels, truth has {}",
                    path.display(),
                    labels.len(),
                    truth.len()
                )));
            }
            rows.push(EvalRow {
                scores: evaluate(&labels, &truth)?,
                path,
            });
        }
    }
    Ok(rows)
}

pub fn render(rows: &[EvalRow]) -> String {
    let mut out = format!("{:<40} {:>8} {:>8} {:>8} {:>8}\n", "labels", "CA", "CF1", "NMI", "ARI");
    for r in rows {
        let s = r.scores;
        out += &format!(
            "{:<40} {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
            r.path.display(),
            100.0 * s.ca,
            100.0 * s.f1,
            100.0 * s.nmi,
            100.0 * s.ari
        );
    }
    out
}
