//! Row space pursuit (RSP) for compressive robust subspace clustering.
//!
//! Given compressed measurements `M = R(L₀ + S₀)` of data drawn from a union
//! of subspaces (`L₀`) with sparse gross corruption (`S₀`), RSP recovers the
//! row space of `L₀` and the corruption from `M` and the sensing matrix `R`
//! alone; the rows of the recovered basis are then clustered with K-Means.
//!
//! Module map:
//!
//! * [`matrix`], [`svd`]: dense kernels and truncated SVD;
//! * [`rng`], [`sensing`], [`synth`]: reproducible data generation;
//! * [`solver`]: the alternating proximal solver;
//! * [`clustering`], [`baselines`], [`metrics`]: clustering and evaluation.

pub mod baselines;
pub mod clustering;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod sensing;
pub mod solver;
pub mod svd;
pub mod synth;

pub use baselines::{pca_rowspace, sim_cluster, sim_rowspace};
pub use clustering::{
    accuracy, cluster_compressed, cluster_compressed_detailed, kmeans, ClusterAssignment, KMeansConfig,
    RowEmbedding,
};
pub use error::{Error, Result};
pub use matrix::{frobenius_norm, matmul, operator_norm, shrink, DenseMatrix};
pub use metrics::{projector_snr, score_of_snr, support_metrics, RecoveryReport};
pub use rng::{derive_seed, SeededRng};
pub use sensing::{compress, make_sensing, make_sensing_with, Regime, SensingMatrix};
pub use solver::{
    gradient_s, objective, solve, solve_from, update_s, update_v, RowSpaceBasis, RspParams, RspSolution,
};
pub use svd::{truncated_svd, TruncatedSvd};
pub use synth::{generate, SynConfig, SynInstance};
