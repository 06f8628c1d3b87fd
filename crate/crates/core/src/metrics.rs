//! Recovery metrics: projector SNR, score buckets, support precision/recall
//! and principal angles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::solver::RowSpaceBasis;
use crate::svd::truncated_svd;

/// Value reported when the two projectors coincide.
pub const SNR_CAP_DB: f64 = 300.0;
/// Squared projector differences below this count as exact recovery.
pub const EXACT_RECOVERY_EPS: f64 = 1e-15;
/// Default support threshold, relative to `max |Ŝ|`.
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-3;

/// ‖VVᵀ − WWᵀ‖_F² as ‖V − W(WᵀV)‖² + ‖W − V(VᵀW)‖², which avoids both
/// forming `n × n` projectors and the cancellation in `r₁ + r₂ − 2‖VᵀW‖²`.
pub(crate) fn projector_distance_sq(v: &RowSpaceBasis, w: &RowSpaceBasis) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::param(format!(
            "bases live in different spaces ({} vs {} rows)",
            v.len(),
            w.len()
        )));
    }
    let (vm, wm) = (v.matrix(), w.matrix());
    let wv = matmul_tn(wm, vm)?;
    let a = vm.sub(&matmul(wm, &wv)?)?;
    let b = wm.sub(&matmul(vm, &wv.transpose())?)?;
    Ok(a.frobenius_norm().powi(2) + b.frobenius_norm().powi(2))
}

/// `10·log₁₀(‖V₀V₀ᵀ‖_F² / ‖V₀V₀ᵀ − V̂V̂ᵀ‖_F²)`, with the first argument as
/// the reference. Capped at [`SNR_CAP_DB`].
pub fn projector_snr(v_true: &RowSpaceBasis, v_est: &RowSpaceBasis) -> Result<f64> {
    let diff = projector_distance_sq(v_true, v_est)?;
    if diff < EXACT_RECOVERY_EPS {
        return Ok(SNR_CAP_DB);
    }
    // ‖V₀V₀ᵀ‖_F² equals the dimension for an orthonormal basis.
    let reference = v_true.dim() as f64;
    Ok((10.0 * (reference / diff).log10()).min(SNR_CAP_DB))
}

/// Buckets an SNR into {0, 0.2, 0.5, 1} at 15/20/30 dB.
pub fn score_of_snr(snr_db: f64) -> f64 {
    if snr_db >= 30.0 {
        1.0
    } else if snr_db >= 20.0 {
        0.5
    } else if snr_db >= 15.0 {
        0.2
    } else {
        0.0
    }
}

/// Support precision and recall of `s_est` against `s_true`, where the
/// support is `{(i, j) : |a_ij| > threshold}`.
pub fn support_metrics(s_true: &DenseMatrix, s_est: &DenseMatrix, threshold: f64) -> Result<(f64, f64)> {
    if s_true.shape() != s_est.shape() {
        return Err(Error::param(format!(
            "support_metrics shape mismatch: {:?} vs {:?}",
            s_true.shape(),
            s_est.shape()
        )));
    }
    if !(threshold >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {threshold}")));
    }
    let (mut both, mut est, mut truth) = (0usize, 0usize, 0usize);
    for (&t, &e) in s_true.as_slice().iter().zip(s_est.as_slice()) {
        let in_true = t.abs() > threshold;
        let in_est = e.abs() > threshold;
        truth += usize::from(in_true);
        est += usize::from(in_est);
        both += usize::from(in_true && in_est);
    }
    let precision = if est == 0 { 1.0 } else { both as f64 / est as f64 };
    let recall = if truth == 0 { 1.0 } else { both as f64 / truth as f64 };
    Ok((precision, recall))
}

/// Principal angles (radians, ascending) between two subspaces.
pub fn principal_angles(v: &RowSpaceBasis, w: &RowSpaceBasis) -> Result<Vec<f64>> {
    if v.len() != w.len() {
        return Err(Error::param("bases live in different spaces"));
    }
    let cross = matmul_tn(v.matrix(), w.matrix())?;
    let k = cross.rows().min(cross.cols());
    let svd = truncated_svd(&cross, k)?;
    Ok(svd
        .singular_values
        .iter()
        .map(|&c| c.clamp(-1.0, 1.0).acos())
        .collect())
}

/// Row-space and sparse-support quality of one recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub snr_db: f64,
    pub score: f64,
    /// ‖Ŝ‖₀ / n.
    pub corruption_size: f64,
    pub support_precision: f64,
    pub support_recall: f64,
}

impl RecoveryReport {
    /// Uses a support threshold of `1e-3 · max |Ŝ|`.
    pub fn evaluate(
        v_true: &RowSpaceBasis,
        v_est: &RowSpaceBasis,
        s_true: &DenseMatrix,
        s_est: &DenseMatrix,
    ) -> Result<Self> {
        let threshold = SUPPORT_REL_THRESHOLD * s_est.max_abs();
        let snr_db = projector_snr(v_true, v_est)?;
        let (support_precision, support_recall) = support_metrics(s_true, s_est, threshold)?;
        let support = s_est
            .as_slice()
            .iter()
            .filter(|v| v.abs() > threshold)
            .count();
        Ok(Self {
            snr_db,
            score: score_of_snr(snr_db),
            corruption_size: support as f64 / s_est.cols() as f64,
            support_precision,
            support_recall,
        })
    }
}
