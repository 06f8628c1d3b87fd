use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rsp_core::RowEmbedding;

use crate::formats::Format;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "RSP_OUT_DIR";

/// 2⁻⁷.
pub const DEFAULT_LAMBDA: f64 = 0.0078125;

#[derive(Debug, Parser)]
#[command(name = "rsp", version, about = "Row space pursuit experiments on compressed data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Base seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the sweep (default: logical cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Matrix file format for outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Write 0 in every wall-clock field so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic union-of-subspaces instance with sparse corruption.
    Synth(SynthArgs),
    /// Draw a sensing matrix and compress a data matrix.
    Compress(CompressArgs),
    /// Recover the row space and sparse corruption from compressed data.
    Solve(SolveArgs),
    /// Cluster the points behind compressed data.
    Cluster(ClusterArgs),
    /// Score recovered row spaces, supports and labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Monte Carlo sweep over subspace dimension and corruption size.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Ambient dimension.
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    /// Number of subspaces.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Points per subspace.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Dimension of each subspace.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Corrupted entries per point.
    #[arg(long, default_value_t = 0.4)]
    pub corruption: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    /// Matrix to compress (m × n).
    #[arg(long)]
    pub input: PathBuf,
    /// Number of measurements.
    #[arg(long)]
    pub p: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Row-space dimension; required whenever a basis is computed.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = rsp_core::solver::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = rsp_core::solver::DEFAULT_TOL)]
    pub tol: f64,
}

/// Compressed input, given either directly or as raw data to compress.
#[derive(Debug, Clone, Args)]
pub struct CompressedInput {
    /// Compressed matrix M (p × n).
    #[arg(long, requires = "sensing", conflicts_with_all = ["observed", "p"])]
    pub compressed: Option<PathBuf>,
    /// Sensing matrix R (p × m) with unit-norm columns.
    #[arg(long, requires = "compressed")]
    pub sensing: Option<PathBuf>,
    /// Raw data X (m × n), compressed in-process with a sensing matrix drawn
    /// from `--seed`.
    #[arg(long, requires = "p")]
    pub observed: Option<PathBuf>,
    /// Measurements when compressing `--observed`.
    #[arg(long, requires = "observed")]
    pub p: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: CompressedInput,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rsp,
    Sim,
    Pca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rsp => "rsp",
            Method::Sim => "sim",
            Method::Pca => "pca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Embedding {
    Raw,
    Lifted,
}

impl From<Embedding> for RowEmbedding {
    fn from(e: Embedding) -> Self {
        match e {
            Embedding::Raw => RowEmbedding::Raw,
            Embedding::Lifted => RowEmbedding::Lifted,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// Cluster the rows of an existing row-space basis instead of solving.
    #[arg(long, conflicts_with_all = ["compressed", "observed"])]
    pub row_space: Option<PathBuf>,
    #[command(flatten)]
    pub input: CompressedInput,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Method::Rsp)]
    pub method: Method,
    /// Scale the columns of M to unit norm before solving.
    #[arg(long)]
    pub normalize: bool,
    /// Feature map applied to the rows of the basis before K-Means.
    #[arg(long, value_enum, default_value_t = Embedding::Lifted)]
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory written by `synth`; supplies every truth file below.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Directory written by `solve` or `cluster`; supplies every estimate below.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub truth_labels: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub true_row_space: Option<PathBuf>,
    #[arg(long)]
    pub row_space: Option<PathBuf>,
    #[arg(long)]
    pub true_sparse: Option<PathBuf>,
    #[arg(long)]
    pub sparse: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Subspace dimensions (default 1..=20).
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// Corruption sizes (default 0.4, 0.8, …, 8.0).
    #[arg(long, value_delimiter = ',')]
    pub corruptions: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_values = ["rsp", "sim", "pca"])]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Fixed RSP rank (default: the true rank of each cell).
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = rsp_core::solver::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = rsp_core::solver::DEFAULT_TOL)]
    pub tol: f64,
    /// Continue an interrupted sweep in the output directory; the grid is
    /// taken from its manifest.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many new trials, leaving the sweep resumable.
    #[arg(long)]
    pub limit: Option<usize>,
}
