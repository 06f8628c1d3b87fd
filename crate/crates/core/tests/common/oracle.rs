//! Reference implementations used only by tests. Nothing here calls into the
//! library's SVD or product kernels.

#![allow(dead_code)]

/// Row-major dense matrix for oracle computations.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Mat {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.at(i, j);
            }
        }
        Mat::new(self.cols, self.rows, data)
    }
}

/// Textbook triple loop.
pub fn naive_matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows);
    let mut out = vec![0.0; a.rows * b.cols];
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.at(i, k) * b.at(k, j);
            }
            out[i * b.cols + j] = acc;
        }
    }
    Mat::new(a.rows, b.cols, out)
}

/// Full SVD by one-sided (Hestenes) Jacobi rotations.
pub struct JacobiSvd {
    /// Descending.
    pub values: Vec<f64>,
    /// Right singular vectors as columns of a `cols × min(rows, cols)` matrix.
    pub right: Mat,
}

pub fn jacobi_svd(a: &Mat) -> JacobiSvd {
    if a.rows < a.cols {
        // Right vectors of A are the left vectors of Aᵀ.
        let t = a.transpose();
        let (values, left) = jacobi_tall(&t);
        return JacobiSvd { values, right: left };
    }
    let (values, _, right) = jacobi_tall_full(a);
    JacobiSvd { values, right }
}

// Returns singular values and left singular vectors of a tall matrix.
fn jacobi_tall(a: &Mat) -> (Vec<f64>, Mat) {
    let (values, left, _) = jacobi_tall_full(a);
    (values, left)
}

fn jacobi_tall_full(a: &Mat) -> (Vec<f64>, Mat, Mat) {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n);
    // Work on columns.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.at(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let values: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut left = vec![0.0; m * n];
    let mut right = vec![0.0; n * n];
    for (k, &j) in order.iter().enumerate() {
        for i in 0..m {
            left[i * n + k] = if norms[j] > 0.0 { cols[j][i] / norms[j] } else { 0.0 };
        }
        for i in 0..n {
            right[i * n + k] = v[j][i];
        }
    }
    (values, Mat::new(m, n, left), Mat::new(n, n, right))
}

/// ‖P_a − P_b‖_F for the column spans of the leading `r` columns of two
/// orthonormal blocks, formed explicitly as `n × n` projectors.
pub fn projector_distance(a: &Mat, b: &Mat, r: usize) -> f64 {
    assert_eq!(a.rows, b.rows);
    let n = a.rows;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pa: f64 = (0..r).map(|k| a.at(i, k) * a.at(j, k)).sum();
            let pb: f64 = (0..r).map(|k| b.at(i, k) * b.at(j, k)).sum();
            sum += (pa - pb).powi(2);
        }
    }
    sum.sqrt()
}

/// Central difference of `f` at `x` along coordinate `idx`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], idx: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[idx] += h;
    minus[idx] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// `½‖(M − RS)(I − VVᵀ)‖_F²` with the `n × n` projector formed explicitly.
pub fn smooth_term(m: &Mat, r: &Mat, v: &Mat, s: &Mat) -> f64 {
    let rs = naive_matmul(r, s);
    let n = m.cols;
    let resid = Mat::new(m.rows, n, m.data.iter().zip(&rs.data).map(|(a, b)| a - b).collect());
    let mut proj = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let vv: f64 = (0..v.cols).map(|k| v.at(i, k) * v.at(j, k)).sum();
            proj[i * n + j] = if i == j { 1.0 } else { 0.0 } - vv;
        }
    }
    let out = naive_matmul(&resid, &Mat::new(n, n, proj));
    out.data.iter().map(|x| x * x).sum::<f64>() / 2.0
}

/// `sign(x)·max(|x| − τ, 0)`, written out by cases.
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}
