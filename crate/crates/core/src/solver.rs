//! Row space pursuit solved by alternating proximal minimization.
//!
//! The program is
//!
//! ```text
//! min_{V, S}  λ‖S‖₁ + ½‖(M − RS)(I − VVᵀ)‖_F²   s.t.  VᵀV = I
//! ```
//!
//! Each iteration takes the exact minimizer in `V` (top right singular
//! vectors of `M − RS`) and then one proximal gradient step in `S` with
//! step `1/ρ`, `ρ = 1.1‖R‖²`. The `n × n` projector `I − VVᵀ` is never
//! formed; every product goes through `A − (AV)Vᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    frobenius_norm, matmul, matmul_nt, matmul_sparse_rhs, matmul_tn, operator_norm, soft_threshold,
    DenseMatrix,
};
use crate::sensing::SensingMatrix;
use crate::svd::{complete_orthonormal, truncated_svd};

/// Multiplier on ‖R‖² for the proximal step.
pub const RHO_FACTOR: f64 = 1.1;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Orthonormality tolerance for [`RowSpaceBasis::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RspParams {
    /// Target row-space dimension.
    pub r: usize,
    pub lambda: f64,
    pub max_iters: usize,
    /// Threshold on ‖S_{t+1} − S_t‖_F / max(1, ‖S_t‖_F).
    pub tol: f64,
}

impl RspParams {
    pub fn new(r: usize, lambda: f64) -> Self {
        Self {
            r,
            lambda,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("r must be at least 1"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::param(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `n × r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSpaceBasis {
    basis: DenseMatrix,
}

impl RowSpaceBasis {
    pub fn new(basis: DenseMatrix) -> Result<Self> {
        let err = orthonormality_error(&basis)?;
        if err > ORTHONORMAL_TOL {
            return Err(Error::param(format!(
                "basis columns are not orthonormal (max |VᵀV − I| = {err:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    pub(crate) fn new_unchecked(basis: DenseMatrix) -> Self {
        Self { basis }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.basis
    }

    /// Number of points `n`.
    pub fn len(&self) -> usize {
        self.basis.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// ‖VVᵀ − WWᵀ‖_F, computed without forming either projector.
    pub fn projector_distance(&self, other: &RowSpaceBasis) -> Result<f64> {
        Ok(crate::metrics::projector_distance_sq(self, other)?.sqrt())
    }
}

/// max |VᵀV − I|.
pub fn orthonormality_error(v: &DenseMatrix) -> Result<f64> {
    let gram = matmul_tn(v, v)?;
    let mut err: f64 = 0.0;
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((gram[(i, j)] - target).abs());
        }
    }
    Ok(err)
}

#[derive(Debug, Clone)]
pub struct RspSolution {
    pub row_space: RowSpaceBasis,
    pub sparse: DenseMatrix,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub rho: f64,
}

fn check_shapes(m_mat: &DenseMatrix, r_mat: &SensingMatrix, s: &DenseMatrix, op: &'static str) -> Result<()> {
    let (p, m) = r_mat.matrix().shape();
    if m_mat.rows() != p {
        return Err(Error::shape(
            op,
            format!("M has {} rows but R has {p}", m_mat.rows()),
        ));
    }
    if s.shape() != (m, m_mat.cols()) {
        return Err(Error::shape(
            op,
            format!("S is {:?}, expected ({m}, {})", s.shape(), m_mat.cols()),
        ));
    }
    Ok(())
}

fn check_basis(m_mat: &DenseMatrix, v: &RowSpaceBasis, op: &'static str) -> Result<()> {
    if v.len() != m_mat.cols() {
        return Err(Error::shape(
            op,
            format!("V has {} rows but M has {} columns", v.len(), m_mat.cols()),
        ));
    }
    Ok(())
}

/// `M − RS`.
fn residual(m_mat: &DenseMatrix, r_mat: &SensingMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    let rs = matmul_sparse_rhs(r_mat.matrix(), s)?;
    m_mat.sub(&rs)
}

/// `A(I − VVᵀ) = A − (AV)Vᵀ`.
fn project_out(a: &DenseMatrix, v: &RowSpaceBasis) -> Result<DenseMatrix> {
    let av = matmul(a, v.matrix())?;
    a.sub(&matmul_nt(&av, v.matrix())?)
}

/// `λ‖S‖₁ + ½‖(M − RS)(I − VVᵀ)‖_F²`.
pub fn objective(
    m_mat: &DenseMatrix,
    r_mat: &SensingMatrix,
    v: &RowSpaceBasis,
    s: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    check_shapes(m_mat, r_mat, s, "objective")?;
    check_basis(m_mat, v, "objective")?;
    let resid = residual(m_mat, r_mat, s)?;
    Ok(objective_from_residual(&resid, v, s, lambda)?)
}

fn objective_from_residual(resid: &DenseMatrix, v: &RowSpaceBasis, s: &DenseMatrix, lambda: f64) -> Result<f64> {
    let smooth = frobenius_norm(&project_out(resid, v)?).powi(2) / 2.0;
    Ok(lambda * s.l1_norm() + smooth)
}

/// Top-`r` right singular vectors of `a`, padded with an orthonormal
/// completion when `r` exceeds `min(rows, cols)`.
fn top_right_vectors(a: &DenseMatrix, r: usize) -> Result<RowSpaceBasis> {
    let available = a.rows().min(a.cols());
    let svd = truncated_svd(a, r.min(available))?;
    let basis = if r > available {
        complete_orthonormal(&svd.right_vectors, r)?
    } else {
        svd.right_vectors
    };
    Ok(RowSpaceBasis::new_unchecked(basis))
}

/// Exact minimizer of the smooth term over orthonormal `V` for fixed `S`.
pub fn update_v(m_mat: &DenseMatrix, r_mat: &SensingMatrix, s: &DenseMatrix, r: usize) -> Result<RowSpaceBasis> {
    check_shapes(m_mat, r_mat, s, "update_v")?;
    let resid = residual(m_mat, r_mat, s)?;
    Ok(RowSpaceBasis::new_unchecked(truncated_svd(&resid, r)?.right_vectors))
}

/// `Rᵀ(RS − M)(I − VVᵀ)`.
pub fn gradient_s(
    m_mat: &DenseMatrix,
    r_mat: &SensingMatrix,
    v: &RowSpaceBasis,
    s: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_shapes(m_mat, r_mat, s, "gradient_s")?;
    check_basis(m_mat, v, "gradient_s")?;
    let resid = residual(m_mat, r_mat, s)?;
    gradient_from_residual(r_mat, &resid, v)
}

fn gradient_from_residual(r_mat: &SensingMatrix, resid: &DenseMatrix, v: &RowSpaceBasis) -> Result<DenseMatrix> {
    let projected = project_out(resid, v)?;
    Ok(matmul_tn(r_mat.matrix(), &projected)?.scale(-1.0))
}

/// Proximal step `shrink(S − grad/ρ, λ/ρ)`.
pub fn update_s(s_prev: &DenseMatrix, grad: &DenseMatrix, lambda: f64, rho: f64) -> Result<DenseMatrix> {
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be > 0, got {rho}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
    }
    if s_prev.shape() != grad.shape() {
        return Err(Error::shape(
            "update_s",
            format!("{:?} vs {:?}", s_prev.shape(), grad.shape()),
        ));
    }
    let tau = lambda / rho;
    let data = s_prev
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&s, &g)| soft_threshold(s - g / rho, tau))
        .collect();
    DenseMatrix::new(s_prev.rows(), s_prev.cols(), data)
}

/// `ρ = 1.1‖R‖²`.
pub fn penalty(r_mat: &SensingMatrix) -> f64 {
    RHO_FACTOR * operator_norm(r_mat.matrix()).powi(2)
}

/// Solves from `S = 0`.
pub fn solve(m_mat: &DenseMatrix, r_mat: &SensingMatrix, params: &RspParams) -> Result<RspSolution> {
    let start = DenseMatrix::zeros(r_mat.ambient_dim(), m_mat.cols());
    solve_from(m_mat, r_mat, params, &start)
}

/// Solves starting from a given sparse estimate.
///
/// When `params.r ≥ p` the constraint is satisfiable for any `S`, so the
/// solver returns after a single V-update with `S = 0`.
pub fn solve_from(
    m_mat: &DenseMatrix,
    r_mat: &SensingMatrix,
    params: &RspParams,
    initial_sparse: &DenseMatrix,
) -> Result<RspSolution> {
    params.validate()?;
    check_shapes(m_mat, r_mat, initial_sparse, "solve")?;
    let (p, n) = m_mat.shape();
    if params.r > n {
        return Err(Error::param(format!(
            "r = {} exceeds the number of points n = {n}",
            params.r
        )));
    }
    let rho = penalty(r_mat);

    if params.r >= p {
        let sparse = DenseMatrix::zeros(r_mat.ambient_dim(), n);
        let row_space = top_right_vectors(m_mat, params.r)?;
        let obj = objective_from_residual(m_mat, &row_space, &sparse, params.lambda)?;
        return Ok(RspSolution {
            row_space,
            sparse,
            objective_trace: vec![obj],
            iterations: 1,
            converged: true,
            rho,
        });
    }
    if !(rho > 0.0) {
        return Err(Error::param("sensing matrix has zero operator norm"));
    }

    let mut s = initial_sparse.clone();
    let mut resid = residual(m_mat, r_mat, &s)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut v = None;
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let basis = top_right_vectors(&resid, params.r)?;
        let v = v.insert(basis);
        let grad = gradient_from_residual(r_mat, &resid, v)?;
        let next = update_s(&s, &grad, params.lambda, rho)?;
        let change = frobenius_norm(&next.sub(&s)?) / frobenius_norm(&s).max(1.0);
        s = next;
        resid = residual(m_mat, r_mat, &s)?;
        trace.push(objective_from_residual(&resid, v, &s, params.lambda)?);
        if change < params.tol {
            converged = true;
            break;
        }
    }
    Ok(RspSolution {
        row_space: v.expect("max_iters >= 1"),
        sparse: s,
        objective_trace: trace,
        iterations,
        converged,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::sensing::make_sensing;

    fn random_problem(p: usize, m: usize, n: usize, seed: u64) -> (DenseMatrix, SensingMatrix) {
        let mut rng = SeededRng::new(seed);
        let r = make_sensing(p, m, seed).unwrap();
        let x = DenseMatrix::random_normal(m, n, &mut rng);
        (crate::sensing::compress(&r, &x).unwrap(), r)
    }

    #[test]
    fn params_validation() {
        assert!(RspParams::new(0, 1.0).validate().is_err());
        assert!(RspParams::new(1, 0.0).validate().is_err());
        assert!(RspParams::new(1, 1.0).with_tol(0.0).validate().is_err());
        assert!(RspParams::new(1, 1.0).with_max_iters(0).validate().is_err());
        assert!(RspParams::new(1, 1.0).validate().is_ok());
    }

    #[test]
    fn objective_zero_cases() {
        let (m_mat, r) = random_problem(4, 8, 6, 1);
        let s = DenseMatrix::zeros(8, 6);
        let v = update_v(&m_mat, &r, &s, 4).unwrap();
        assert!(objective(&m_mat, &r, &v, &s, 0.5).unwrap() < 1e-20);
        let zero_m = DenseMatrix::zeros(4, 6);
        assert_eq!(objective(&zero_m, &r, &v, &s, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_projector_formula() {
        let (m_mat, r) = random_problem(5, 9, 7, 2);
        let s = DenseMatrix::zeros(9, 7);
        let mut rng = SeededRng::new(3);
        let raw = DenseMatrix::random_normal(7, 2, &mut rng);
        let v = RowSpaceBasis::new(truncated_svd(&raw, 2).unwrap().left_vectors).unwrap();
        let vvt = matmul_nt(v.matrix(), v.matrix()).unwrap();
        let projector = DenseMatrix::identity(7).sub(&vvt).unwrap();
        let direct = frobenius_norm(&matmul(&m_mat, &projector).unwrap()).powi(2) / 2.0;
        let got = objective(&m_mat, &r, &v, &s, 1.0).unwrap();
        assert!((got - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn shape_errors() {
        let (m_mat, r) = random_problem(4, 8, 6, 4);
        let bad_s = DenseMatrix::zeros(7, 6);
        assert!(matches!(update_v(&m_mat, &r, &bad_s, 2), Err(Error::Shape { .. })));
        let s = DenseMatrix::zeros(8, 6);
        let v = update_v(&m_mat, &r, &s, 2).unwrap();
        let bad_m = DenseMatrix::zeros(3, 6);
        assert!(gradient_s(&bad_m, &r, &v, &s).is_err());
    }

    #[test]
    fn gradient_vanishes_when_residual_or_projector_is_zero() {
        let (_, r) = random_problem(4, 8, 6, 5);
        let mut rng = SeededRng::new(6);
        let s = DenseMatrix::random_normal(8, 6, &mut rng);
        let m_mat = matmul(r.matrix(), &s).unwrap();
        let v = update_v(&m_mat, &r, &DenseMatrix::zeros(8, 6), 2).unwrap();
        assert!(gradient_s(&m_mat, &r, &v, &s).unwrap().max_abs() < 1e-12);

        let full = RowSpaceBasis::new(DenseMatrix::identity(6)).unwrap();
        let zero = DenseMatrix::zeros(8, 6);
        assert!(gradient_s(&m_mat, &r, &full, &zero).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn update_s_cases() {
        let mut rng = SeededRng::new(7);
        let s = DenseMatrix::random_normal(4, 4, &mut rng);
        let g = DenseMatrix::zeros(4, 4);
        assert_eq!(update_s(&s, &g, 2.0 * s.max_abs(), 2.0).unwrap().count_nonzero(), 0);
        assert_eq!(update_s(&s, &g, 0.0, 3.0).unwrap(), s);
        assert!(matches!(update_s(&s, &g, 1.0, 0.0), Err(Error::Parameter(_))));
        assert!(update_s(&s, &g, 1.0, -1.0).is_err());
    }

    #[test]
    fn degenerate_rank_returns_after_one_iteration() {
        let (m_mat, r) = random_problem(5, 12, 10, 8);
        let sol = solve(&m_mat, &r, &RspParams::new(5, 0.01)).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
        assert_eq!(sol.sparse.count_nonzero(), 0);
        assert_eq!(sol.row_space.dim(), 5);

        let wider = solve(&m_mat, &r, &RspParams::new(7, 0.01)).unwrap();
        assert_eq!(wider.row_space.dim(), 7);
        assert!(orthonormality_error(wider.row_space.matrix()).unwrap() < 1e-10);
        assert!(wider.objective_trace[0] < 1e-20);
    }

    #[test]
    fn huge_lambda_keeps_sparse_zero() {
        let (m_mat, r) = random_problem(6, 15, 12, 9);
        let sol = solve(&m_mat, &r, &RspParams::new(2, 1e6)).unwrap();
        assert_eq!(sol.sparse.count_nonzero(), 0);
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
    }

    #[test]
    fn rank_larger_than_points_rejected() {
        let (m_mat, r) = random_problem(6, 15, 4, 10);
        assert!(solve(&m_mat, &r, &RspParams::new(5, 1.0)).is_err());
    }
}
