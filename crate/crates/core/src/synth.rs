//! Synthetic union-of-subspaces instances with sparse ±1 corruption.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matmul, DenseMatrix};
use crate::rng::SeededRng;
use crate::solver::RowSpaceBasis;
use crate::svd::truncated_svd;

/// Parameters of one synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynConfig {
    /// Ambient dimension.
    pub m: usize,
    pub n_per_class: usize,
    /// Number of subspaces.
    pub k: usize,
    pub subspace_dim: usize,
    /// Target ‖S₀‖₀ / n.
    pub corruption_size: f64,
    pub seed: u64,
}

impl SynConfig {
    pub fn n(&self) -> usize {
        self.k * self.n_per_class
    }

    pub fn true_rank(&self) -> usize {
        self.k * self.subspace_dim
    }

    /// `round(corruption_size · n)`.
    pub fn corruption_count(&self) -> usize {
        (self.corruption_size * self.n() as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n_per_class == 0 || self.k == 0 || self.subspace_dim == 0 {
            return Err(Error::param(
                "m, n_per_class, k and subspace_dim must all be positive",
            ));
        }
        if self.true_rank() > self.m.min(self.n()) {
            return Err(Error::param(format!(
                "k*subspace_dim = {} exceeds min(m, n) = {}",
                self.true_rank(),
                self.m.min(self.n())
            )));
        }
        if !self.corruption_size.is_finite() || self.corruption_size < 0.0 {
            return Err(Error::param(format!(
                "corruption size must be finite and >= 0, got {}",
                self.corruption_size
            )));
        }
        if self.corruption_count() > self.m * self.n() {
            return Err(Error::param(format!(
                "{} corrupted entries requested but the matrix has only {}",
                self.corruption_count(),
                self.m * self.n()
            )));
        }
        Ok(())
    }
}

/// Ground truth for one trial: `observed = clean + corruption`.
#[derive(Debug, Clone)]
pub struct SynInstance {
    pub config: SynConfig,
    /// L₀, `m × n`, sup-norm 1.
    pub clean: DenseMatrix,
    /// S₀, `m × n`, entries in {−1, 0, +1}.
    pub corruption: DenseMatrix,
    /// X = L₀ + S₀.
    pub observed: DenseMatrix,
    /// Generating subspace of each column.
    pub labels: Vec<usize>,
    pub true_rank: usize,
    pub corruption_count: usize,
    /// Orthonormal `m × d` basis of each subspace.
    pub subspace_bases: Vec<DenseMatrix>,
}

impl SynInstance {
    /// V₀: top `true_rank` right singular vectors of the clean data.
    pub fn true_row_space(&self) -> Result<RowSpaceBasis> {
        RowSpaceBasis::new(truncated_svd(&self.clean, self.true_rank)?.right_vectors)
    }
}

/// Draws an instance.
///
/// Random draws happen in this order: for each subspace, an `m × d` Gaussian
/// (row-major) orthonormalized by QR, then a `d × n_per_class` Gaussian
/// coefficient block; afterwards the corrupted positions (partial
/// Fisher-Yates over the row-major `m × n` grid) and finally their signs.
pub fn generate(cfg: &SynConfig) -> Result<SynInstance> {
    cfg.validate()?;
    let (m, d, npc, n) = (cfg.m, cfg.subspace_dim, cfg.n_per_class, cfg.n());
    let mut rng = SeededRng::new(cfg.seed);

    let mut clean = DenseMatrix::zeros(m, n);
    let mut bases = Vec::with_capacity(cfg.k);
    let mut labels = Vec::with_capacity(n);
    for class in 0..cfg.k {
        let gaussian = rng.normals(m * d);
        let q = DMatrix::from_row_slice(m, d, &gaussian).qr().q();
        let basis = DenseMatrix::from_fn(m, d, |i, j| q[(i, j)]);
        let coeffs = DenseMatrix::random_normal(d, npc, &mut rng);
        let block = matmul(&basis, &coeffs)?;
        for i in 0..m {
            for j in 0..npc {
                clean[(i, class * npc + j)] = block[(i, j)];
            }
        }
        labels.extend(std::iter::repeat(class).take(npc));
        bases.push(basis);
    }
    let peak = clean.max_abs();
    if peak > 0.0 {
        clean = clean.map(|x| x / peak);
    }

    let count = cfg.corruption_count();
    let total = m * n;
    let mut positions: Vec<usize> = (0..total).collect();
    for i in 0..count {
        let j = i + rng.below((total - i) as u64) as usize;
        positions.swap(i, j);
    }
    let mut corruption = DenseMatrix::zeros(m, n);
    for &pos in &positions[..count] {
        corruption.as_mut_slice()[pos] = rng.sign();
    }

    let observed = clean.add(&corruption)?;
    Ok(SynInstance {
        config: cfg.clone(),
        clean,
        corruption,
        observed,
        labels,
        true_rank: cfg.true_rank(),
        corruption_count: count,
        subspace_bases: bases,
    })
}
