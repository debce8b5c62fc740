//! Multi-view dataset container, graph and feature storage, and the on-disk
//! format.

mod dataset;
mod graph;
pub mod io;
pub mod knn;
pub mod synth;

pub use dataset::{FeatureMatrix, MultiViewDataset, View};
pub use graph::SparseGraph;
pub use io::{load_dataset, save_dataset};
pub use knn::{build_knn_graph, build_knn_graph_with, ExactSearch, NeighborSearch};
pub use synth::{synth_multiview, SynthConfig};
