//! Dense row-major matrices and the kernels every other module builds on.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Real `rows × cols` matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Validating constructor: positive dimensions, matching length, finite
    /// entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "DenseMatrix::new",
                format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("DenseMatrix::from_rows", "ragged rows"));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// I.i.d. standard normal entries drawn in row-major order.
    pub fn random_normal(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        Self {
            rows,
            cols,
            data: rng.normals(rows * cols),
        }
    }

    // Skips validation; callers guarantee the length.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Leading `count` columns.
    pub fn leading_columns(&self, count: usize) -> Self {
        assert!(count <= self.cols);
        Self::from_fn(self.rows, count, |i, j| self[(i, j)])
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "hstack",
                format!("{} rows vs {} rows", self.rows, other.rows),
            ));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self::from_vec_unchecked(self.rows, cols, data))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        matmul(self, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// Sum of absolute values (ℓ₁ norm of the matrix seen as a vector).
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v * v;
            }
        }
        sums.into_iter().map(f64::sqrt).collect()
    }

    /// Rescales every nonzero column to unit ℓ₂ norm; zero columns stay zero.
    pub fn normalize_columns(&self) -> Self {
        let norms = self.column_norms();
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            for (v, &n) in row.iter_mut().zip(&norms) {
                if n > 0.0 {
                    *v /= n;
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Which operand of a product is read transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    N,
    T,
}

fn gemm(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op, name: &'static str) -> Result<DenseMatrix> {
    let (m, k, rsa, csa) = match op_a {
        Op::N => (a.rows, a.cols, a.cols as isize, 1),
        Op::T => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match op_b {
        Op::N => (b.rows, b.cols, b.cols as isize, 1),
        Op::T => (b.cols, b.rows, 1, b.cols as isize),
    };
    if k != kb {
        return Err(Error::shape(
            name,
            format!("inner dimensions differ ({m}x{k} times {kb}x{n})"),
        ));
    }
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    // SAFETY: the pointers and strides describe exactly the buffers of `a`,
    // `b` and `out`, whose lengths were checked against the shapes above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, Op::N, b, Op::N, "matmul")
}

/// `aᵀ · b` without forming the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, Op::T, b, Op::N, "matmul_tn")
}

/// `a · bᵀ` without forming the transpose.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    gemm(a, Op::N, b, Op::T, "matmul_nt")
}

/// `a · b` where `b` is expected to be mostly zeros. Cost is proportional to
/// `a.rows · nnz(b)`; falls back to the dense kernel when `b` is not sparse.
pub fn matmul_sparse_rhs(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "matmul_sparse_rhs",
            format!("inner dimensions differ ({:?} times {:?})", a.shape(), b.shape()),
        ));
    }
    let nnz = b.count_nonzero();
    if nnz * 8 > b.data.len() {
        return matmul(a, b);
    }
    let (p, n) = (a.rows, b.cols);
    let mut out = DenseMatrix::zeros(p, n);
    for (inner, b_row) in b.data.chunks_exact(n).enumerate() {
        for (j, &bv) in b_row.iter().enumerate() {
            if bv == 0.0 {
                continue;
            }
            for q in 0..p {
                out.data[q * n + j] += a.data[q * a.cols + inner] * bv;
            }
        }
    }
    Ok(out)
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Entry-wise soft threshold `x ↦ sign(x)·max(|x| − tau, 0)`.
pub fn shrink(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::param(format!("shrink threshold must be finite and >= 0, got {tau}")));
    }
    Ok(a.map(|x| soft_threshold(x, tau)))
}

#[inline]
pub(crate) fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;
const POWER_START_SEED: u64 = 0x0b5e_55ed_5eed_0001;

/// Spectral norm (largest singular value) by power iteration on `aᵀa`.
///
/// Stops when the Rayleigh quotient changes by less than 1e-10 relative,
/// or after 1000 steps. The start vector is a fixed pseudo-random vector.
pub fn operator_norm(a: &DenseMatrix) -> f64 {
    let (rows, cols) = a.shape();
    let mut rng = SeededRng::new(POWER_START_SEED);
    let mut v = rng.normals(cols);
    let mut av = vec![0.0; rows];
    let mut next = vec![0.0; cols];
    normalize(&mut v);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        mat_vec(a, &v, &mut av);
        let rayleigh: f64 = av.iter().map(|x| x * x).sum();
        if rayleigh == 0.0 {
            // Either a is zero or v is in its null space; the random start
            // makes the second case measure-zero.
            return 0.0;
        }
        mat_t_vec(a, &av, &mut next);
        let converged = (rayleigh - estimate).abs() <= POWER_TOL * rayleigh;
        estimate = rayleigh;
        if converged {
            break;
        }
        std::mem::swap(&mut v, &mut next);
        normalize(&mut v);
    }
    estimate.sqrt()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn mat_vec(a: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(a.data.chunks_exact(a.cols)) {
        *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
    }
}

fn mat_t_vec(a: &DenseMatrix, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (&ui, row) in u.iter().zip(a.data.chunks_exact(a.cols)) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += ui * x;
        }
    }
}
