//! Scalable multi-view subspace clustering.
//!
//! Each view's data is reduced to its leading left singular vectors, lifted
//! through an explicit nonnegative kernel feature map, and treated as a
//! factor `B` of an implicit affinity `B Bᵀ`. Degree normalization, view
//! weighting, consensus and spectral embedding all operate on these factors,
//! so memory and time stay linear in the number of nodes.

pub mod data;
pub mod dense;
pub mod error;
pub mod kernel;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod propagate;
pub mod spectral;
pub mod weights;

pub use data::{load_dataset, save_dataset, synth_multiview, FeatureMatrix, MultiViewDataset, SparseGraph, View};
pub use dense::DenseMatrix;
pub use error::{DataError, Error, GraphError, Result};
pub use kernel::{KernelKind, KernelMap, KernelSettings};
pub use kmeans::{kmeans, KMeansOptions, Partition};
pub use metrics::{evaluate, Scores};
pub use pipeline::{run_mvsck, run_mvsck_cached, run_on_features, ClusteringResult, ConcatScale, PipelineConfig};
pub use propagate::Normalization;
pub use spectral::FactorMatrix;
pub use weights::{ViewWeights, WeightMode};
