//! Baselines that ignore the sensing matrix: SIM and PCA on `M` directly.
//!
//! Both take the top right singular vectors of the compressed matrix. They
//! coincide mathematically; both names are kept so reports can label them the
//! way comparison tables usually do.

use crate::clustering::{cluster_rows, ClusterAssignment, RowEmbedding};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::solver::RowSpaceBasis;
use crate::svd::truncated_svd;

fn top_right(m_mat: &DenseMatrix, r: usize) -> Result<RowSpaceBasis> {
    let (p, n) = m_mat.shape();
    if r == 0 || r > p.min(n) {
        return Err(Error::param(format!(
            "rank {r} out of range for a {p}x{n} matrix"
        )));
    }
    RowSpaceBasis::new(truncated_svd(m_mat, r)?.right_vectors)
}

/// Shape-interaction-matrix estimate: top-`r` right singular vectors of `M`.
pub fn sim_rowspace(m_mat: &DenseMatrix, r: usize) -> Result<RowSpaceBasis> {
    top_right(m_mat, r)
}

/// PCA estimate of the row space from the SVD of `M`.
pub fn pca_rowspace(m_mat: &DenseMatrix, r: usize) -> Result<RowSpaceBasis> {
    top_right(m_mat, r)
}

/// SIM row space followed by K-Means on its rows.
pub fn sim_cluster(m_mat: &DenseMatrix, r: usize, k: usize, seed: u64) -> Result<ClusterAssignment> {
    sim_cluster_with(m_mat, r, k, seed, RowEmbedding::default())
}

pub fn sim_cluster_with(
    m_mat: &DenseMatrix,
    r: usize,
    k: usize,
    seed: u64,
    embedding: RowEmbedding,
) -> Result<ClusterAssignment> {
    let v = sim_rowspace(m_mat, r)?;
    cluster_rows(&v, k, seed, embedding)
}
