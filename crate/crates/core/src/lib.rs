//! Multi-view spectral clustering on landmark graphs, with the views co-trained
//! toward a shared embedding.
//!
//! Each view is summarized by a sparse sample-to-landmark affinity matrix.
//! Per-view spectral embeddings come from `p x p` eigenproblems, are fused
//! into one augmented embedding, and the fused affinities reweight every
//! view until the fused embedding stops moving. Nothing of size `n x n` is
//! ever allocated.

pub mod affinity;
pub mod cotrain;
pub mod data;
pub mod error;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use affinity::{
    build_sparse_representation, median_bandwidth, normalize_columns, NormalizedRepresentation, RowSparse,
    SparseRepresentation,
};
pub use cotrain::{
    augmented_representation, convergence_delta, extract_landmark_affinity, projector_distance, run_guided_cotraining,
    update_view, AugmentedView, ClampMode, CoTrainConfig, CoTrainingTrace, IterationRecord, LandmarkAffinity,
    LandmarkMethod, SigmaMode, StageTimings, UpdateOptions, UpdateStats,
};
pub use data::{generate_synthetic, load_manifest, write_dataset, MatrixFormat, MultiViewDataset, SyntheticSpec, ViewMatrix};
pub use error::{Error, Result};
pub use kmeans::{kmeans, row_normalize, ClusteringResult};
pub use metrics::{accuracy, hungarian, nmi, ContingencyTable};
pub use pipeline::{cluster, landmark_sweep, BenchConfig, ClusterOptions, ClusterRun, Metrics, PipelineTimings, RunReport};
pub use sampling::{kmedoids_landmarks, random_landmarks, LandmarkSet};
pub use spectral::{gram_matrix, reduced_representation, ReducedRepresentation};
