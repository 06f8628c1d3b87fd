//! Truncated singular value decomposition.
//!
//! Small problems (smaller dimension ≤ 64, or when the sketch would not be
//! smaller than the matrix) go through a dense Golub-Kahan SVD. Larger ones
//! use a randomized range finder with oversampling 10 and two power
//! iterations, followed by a dense SVD of the projected problem.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::rng::SeededRng;

/// Largest smaller-dimension handled by the dense path.
pub const DENSE_CUTOFF: usize = 64;
pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 2;

const DENSE_MAX_ITERS: usize = 10_000;
// nalgebra's own default; with exactly f64::EPSILON its Golub-Kahan loop can
// return wrong singular values on rank-deficient input.
const DENSE_EPS: f64 = 5.0 * f64::EPSILON;
const SKETCH_SEED: u64 = 0x5eed_0f_5a6b_0001;

/// Top-`r` singular triplets, singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `rows × r`, orthonormal columns.
    pub left_vectors: DenseMatrix,
    pub singular_values: Vec<f64>,
    /// `cols × r`, orthonormal columns.
    pub right_vectors: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.left_vectors.clone();
        let r = self.rank();
        for i in 0..scaled.rows() {
            for j in 0..r {
                scaled[(i, j)] *= self.singular_values[j];
            }
        }
        crate::matrix::matmul_nt(&scaled, &self.right_vectors).expect("factor shapes agree")
    }
}

pub fn truncated_svd(a: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let min_dim = a.rows().min(a.cols());
    if r == 0 || r > min_dim {
        return Err(Error::param(format!(
            "truncated_svd rank must be in 1..={min_dim}, got {r}"
        )));
    }
    if min_dim <= DENSE_CUTOFF || r + OVERSAMPLING >= min_dim {
        dense_truncated(a, r)
    } else {
        randomized_truncated(a, r)
    }
}

fn to_nalgebra(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD through nalgebra, truncated to the `r` largest triplets.
///
/// Strongly rectangular input is first reduced by a thin QR of its tall
/// orientation, so the Golub-Kahan iteration only runs on a square factor.
fn dense_truncated(a: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = a.shape();
    if cols >= 2 * rows {
        // A = Rᵀ Qᵀ with Aᵀ = QR; SVD of Rᵀ = U Σ Wᵀ gives right vectors Q W.
        let qr = DMatrix::from_column_slice(cols, rows, a.as_slice()).qr();
        let (q, r_factor) = (qr.q(), qr.r());
        let small = square_svd(&r_factor.transpose(), r)?;
        let right = &q * &small.v;
        return Ok(small.into_truncated(from_nalgebra(&right)));
    }
    if rows >= 2 * cols {
        // A = Q R; SVD of R = U Σ Wᵀ gives left vectors Q U.
        let qr = to_nalgebra(a).qr();
        let (q, r_factor) = (qr.q(), qr.r());
        let small = square_svd(&r_factor, r)?;
        let left = &q * &small.u;
        return Ok(TruncatedSvd {
            left_vectors: from_nalgebra(&left),
            singular_values: small.values,
            right_vectors: from_nalgebra(&small.v),
        });
    }
    let small = square_svd(&to_nalgebra(a), r)?;
    Ok(TruncatedSvd {
        left_vectors: from_nalgebra(&small.u),
        singular_values: small.values,
        right_vectors: from_nalgebra(&small.v),
    })
}

struct SmallSvd {
    u: DMatrix<f64>,
    values: Vec<f64>,
    v: DMatrix<f64>,
}

impl SmallSvd {
    fn into_truncated(self, right: DenseMatrix) -> TruncatedSvd {
        TruncatedSvd {
            left_vectors: from_nalgebra(&self.u),
            singular_values: self.values,
            right_vectors: right,
        }
    }
}

/// Top-`r` triplets of a dense matrix, as nalgebra matrices with the vectors
/// in columns.
fn square_svd(a: &DMatrix<f64>, r: usize) -> Result<SmallSvd> {
    let svd = a
        .clone()
        .try_svd(true, true, DENSE_EPS, DENSE_MAX_ITERS)
        .ok_or(Error::Numeric {
            what: "dense SVD",
            iterations: DENSE_MAX_ITERS,
        })?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(r);

    Ok(SmallSvd {
        u: DMatrix::from_fn(a.nrows(), r, |i, k| u[(i, order[k])]),
        values: order.iter().map(|&k| svd.singular_values[k].max(0.0)).collect(),
        v: DMatrix::from_fn(a.ncols(), r, |i, k| v_t[(order[k], i)]),
    })
}

/// Orthonormal basis for the column space of `y` (thin Householder QR).
fn orthonormal_basis(y: &DenseMatrix) -> DenseMatrix {
    let q = to_nalgebra(y).qr().q();
    from_nalgebra(&q)
}

fn randomized_truncated(a: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let sketch = r + OVERSAMPLING;
    let mut rng = SeededRng::new(SKETCH_SEED);
    let omega = DenseMatrix::random_normal(a.cols(), sketch, &mut rng);

    let mut q = orthonormal_basis(&matmul(a, &omega)?);
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(&matmul_tn(a, &q)?);
        q = orthonormal_basis(&matmul(a, &z)?);
    }

    // B = Qᵀ A is sketch × cols; its SVD lifts back through Q.
    let b = matmul_tn(&q, a)?;
    let small = dense_truncated(&b, r)?;
    Ok(TruncatedSvd {
        left_vectors: matmul(&q, &small.left_vectors)?,
        singular_values: small.singular_values,
        right_vectors: small.right_vectors,
    })
}

/// Extends an `n × q` orthonormal block to `n × target` orthonormal columns by
/// Gram-Schmidt against standard basis vectors, in index order.
pub fn complete_orthonormal(basis: &DenseMatrix, target: usize) -> Result<DenseMatrix> {
    let n = basis.rows();
    if target > n {
        return Err(Error::param(format!(
            "cannot build {target} orthonormal columns in dimension {n}"
        )));
    }
    let mut columns: Vec<Vec<f64>> = (0..basis.cols()).map(|j| basis.column(j)).collect();
    let mut candidate = 0;
    while columns.len() < target && candidate < n {
        let mut v = vec![0.0; n];
        v[candidate] = 1.0;
        candidate += 1;
        // Two passes of classical Gram-Schmidt.
        for _ in 0..2 {
            for c in &columns {
                let dot: f64 = c.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            v.iter_mut().for_each(|x| *x /= norm);
            columns.push(v);
        }
    }
    if columns.len() < target {
        return Err(Error::Numeric {
            what: "orthonormal completion",
            iterations: candidate,
        });
    }
    Ok(DenseMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(v: &DenseMatrix) -> f64 {
        let g = matmul_tn(v, v).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }

    #[test]
    fn diagonal_values() {
        let d = DenseMatrix::from_diagonal(&[3.0, 2.0, 1.0]);
        let svd = truncated_svd(&d, 2).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((svd.singular_values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [2.0, 1.0, -1.0];
        let a = DenseMatrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let svd = truncated_svd(&a, 1).unwrap();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((svd.singular_values[0] - nu * nv).abs() < 1e-12 * nu * nv);
        let sign = svd.right_vectors[(0, 0)].signum() * v[0].signum();
        for j in 0..3 {
            assert!((svd.right_vectors[(j, 0)] - sign * v[j] / nv).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_out_of_range() {
        let a = DenseMatrix::zeros(3, 4);
        assert!(matches!(truncated_svd(&a, 0), Err(Error::Parameter(_))));
        assert!(matches!(truncated_svd(&a, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn wide_and_tall_full_rank_reconstruct() {
        let mut rng = SeededRng::new(11);
        for (r, c) in [(5, 9), (9, 5), (6, 6)] {
            let a = DenseMatrix::random_normal(r, c, &mut rng);
            let svd = truncated_svd(&a, r.min(c)).unwrap();
            let diff = svd.reconstruct().sub(&a).unwrap().frobenius_norm();
            assert!(diff < 1e-12 * a.frobenius_norm());
            assert!(gram_error(&svd.left_vectors) < 1e-12);
            assert!(gram_error(&svd.right_vectors) < 1e-12);
        }
    }

    #[test]
    fn randomized_path_on_low_rank_matrix() {
        let mut rng = SeededRng::new(12);
        let left = DenseMatrix::random_normal(150, 6, &mut rng);
        let right = DenseMatrix::random_normal(6, 120, &mut rng);
        let a = matmul(&left, &right).unwrap();
        let svd = truncated_svd(&a, 6).unwrap();
        let diff = svd.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(diff < 1e-9 * a.frobenius_norm(), "diff {diff}");
        assert!(gram_error(&svd.right_vectors) < 1e-10);
        assert!(gram_error(&svd.left_vectors) < 1e-10);
        let dense = dense_truncated(&a, 6).unwrap();
        for (x, y) in svd.singular_values.iter().zip(&dense.singular_values) {
            assert!((x - y).abs() < 1e-9 * y);
        }
    }

    #[test]
    fn completion_extends_basis() {
        let e = DenseMatrix::from_fn(4, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let full = complete_orthonormal(&e, 4).unwrap();
        assert_eq!(full.cols(), 4);
        assert!(gram_error(&full) < 1e-14);
        assert!(complete_orthonormal(&e, 5).is_err());
    }
}
