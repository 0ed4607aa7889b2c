//! Multimodal style transfer over deep feature tensors.
//!
//! Style features are clustered into sub-styles, every content position is
//! matched to a sub-style by minimizing a Potts labeling energy with graph
//! cuts, and each matched content/style group is transferred with a
//! whitening/coloring (or AdaIN) transform before the groups are reassembled.

pub mod clustering;
pub mod error;
pub mod feature_io;
pub mod label_map;
pub mod matching;
pub mod maxflow;
pub mod metrics;
pub mod npy;
pub mod pipeline;
pub mod transform;

pub use clustering::{assign_nearest, kmeans_fit, ClusterModel};
pub use error::{Error, Result};
pub use feature_io::{read_tensor, write_tensor, FeatureMap, FeatureMatrix};
pub use matching::{
    brute_force_labeling, build_data_cost, cosine_distance, gather_groups, solve_labeling,
    total_energy, DataCost, EnergyParams, LabelField, Metric,
};
pub use maxflow::{solve_maxflow, Algorithm, CutResult, FlowNetwork, Side};
pub use pipeline::{run_mst, PipelineConfig, Report, Settings};
pub use transform::{Alpha, TransformMode, TransformParams};
