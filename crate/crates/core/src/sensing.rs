//! Random Gaussian sensing matrices with unit-norm columns.

use crate::error::{Error, Result};
use crate::matrix::{matmul, DenseMatrix};
use crate::rng::SeededRng;

/// Column-norm tolerance accepted when wrapping an existing matrix.
pub const COLUMN_NORM_TOL: f64 = 1e-12;

/// Whether `p ≥ m` (no compression) is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Require `p < m`.
    Compressive,
    /// Accept any `p`; used for degenerate and identity cases.
    Unrestricted,
}

/// `p × m` sensing matrix together with the seed that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    matrix: DenseMatrix,
    seed: u64,
}

impl SensingMatrix {
    /// Wraps an existing matrix after checking the unit-column invariant.
    pub fn from_matrix(matrix: DenseMatrix, seed: u64, regime: Regime) -> Result<Self> {
        check_regime(matrix.rows(), matrix.cols(), regime)?;
        for (j, norm) in matrix.column_norms().into_iter().enumerate() {
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(Error::param(format!(
                    "sensing column {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { matrix, seed })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of measurements `p`.
    pub fn measurements(&self) -> usize {
        self.matrix.rows()
    }

    /// Ambient dimension `m`.
    pub fn ambient_dim(&self) -> usize {
        self.matrix.cols()
    }
}

fn check_regime(p: usize, m: usize, regime: Regime) -> Result<()> {
    if regime == Regime::Compressive && p >= m {
        return Err(Error::param(format!(
            "sensing matrix must compress (p < m), got p={p}, m={m}"
        )));
    }
    Ok(())
}

/// Generates a `p × m` sensing matrix in the compressive regime (`p < m`).
pub fn make_sensing(p: usize, m: usize, seed: u64) -> Result<SensingMatrix> {
    make_sensing_with(p, m, seed, Regime::Compressive)
}

/// Generates a sensing matrix: i.i.d. standard normal entries, drawn column
/// by column, each column divided by its ℓ₂ norm. A column that comes out
/// exactly zero is redrawn.
pub fn make_sensing_with(p: usize, m: usize, seed: u64, regime: Regime) -> Result<SensingMatrix> {
    if p == 0 || m == 0 {
        return Err(Error::param(format!(
            "sensing dimensions must be positive, got p={p}, m={m}"
        )));
    }
    check_regime(p, m, regime)?;
    let mut rng = SeededRng::new(seed);
    let mut matrix = DenseMatrix::zeros(p, m);
    for j in 0..m {
        let column = loop {
            let mut col = rng.normals(p);
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|x| *x /= norm);
                break col;
            }
        };
        for (i, v) in column.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(SensingMatrix { matrix, seed })
}

/// `M = R X`.
pub fn compress(r: &SensingMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if r.ambient_dim() != x.rows() {
        return Err(Error::shape(
            "compress",
            format!(
                "sensing matrix has {} columns but data has {} rows",
                r.ambient_dim(),
                x.rows()
            ),
        ));
    }
    matmul(&r.matrix, x)
}
