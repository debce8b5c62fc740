use serde::{Deserialize, Serialize};

use super::graph::SparseGraph;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Dense node features, one row per node. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix(DenseMatrix);

impl FeatureMatrix {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::numeric("feature matrix contains non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn d(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }
}

/// One representation of the node set: features, an optional graph, and the
/// number of smoothing steps to apply before clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub graph: Option<SparseGraph>,
    pub features: FeatureMatrix,
    pub propagation_order: usize,
    /// For a view without its own graph: the view whose graph smooths it.
    /// `None` falls back to the first view that has a graph.
    pub graph_from: Option<usize>,
}

impl View {
    pub fn new(features: FeatureMatrix, graph: Option<SparseGraph>, propagation_order: usize) -> Self {
        Self {
            graph,
            features,
            propagation_order,
            graph_from: None,
        }
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    views: Vec<View>,
    n: usize,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<View>, labels: Option<Vec<usize>>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::config("a dataset needs at least one view"));
        };
        let n = first.n();
        for (v, view) in views.iter().enumerate() {
            if view.n() != n {
                return Err(Error::dim(format!(
                    "view {v} has {} feature rows, view 0 has {n}",
                    view.n()
                )));
            }
            if let Some(g) = &view.graph {
                if g.n() != n {
                    return Err(Error::dim(format!("view {v} graph has n = {}, features have {n}", g.n())));
                }
            }
            if let Some(src) = view.graph_from {
                if views.get(src).and_then(|s| s.graph.as_ref()).is_none() {
                    return Err(Error::config(format!(
                        "view {v} borrows the graph of view {src}, which has none"
                    )));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::dim(format!("{} labels for {n} nodes", l.len())));
            }
        }
        Ok(Self { views, n, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// The graph used to smooth view `v`: its own, the one it names, or the
    /// first graph in the dataset.
    pub fn propagation_graph(&self, v: usize) -> Option<&SparseGraph> {
        let view = &self.views[v];
        view.graph
            .as_ref()
            .or_else(|| view.graph_from.and_then(|s| self.views[s].graph.as_ref()))
            .or_else(|| self.views.iter().find_map(|w| w.graph.as_ref()))
    }

    pub fn set_propagation_order(&mut self, v: usize, p: usize) -> Result<()> {
        let view = self
            .views
            .get_mut(v)
            .ok_or_else(|| Error::config(format!("no view {v}")))?;
        view.propagation_order = p;
        Ok(())
    }

    pub fn push_view(&mut self, view: View) -> Result<()> {
        let mut views = std::mem::take(&mut self.views);
        views.push(view);
        *self = Self::new(views, self.labels.take())?;
        Ok(())
    }
}
