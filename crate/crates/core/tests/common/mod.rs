#![allow(dead_code)]

pub mod oracle;

use oracle::Mat;
use rsp_core::{
    compress, generate, make_sensing_with, DenseMatrix, Regime, SeededRng, SensingMatrix, SynConfig, SynInstance,
};

pub fn to_oracle(a: &DenseMatrix) -> Mat {
    Mat::new(a.rows(), a.cols(), a.as_slice().to_vec())
}

/// Random `M = R X` of the given shape with a Gaussian `X`.
pub struct Problem {
    pub m_mat: DenseMatrix,
    pub sensing: SensingMatrix,
}

pub fn random_problem(p: usize, m: usize, n: usize, seed: u64) -> Problem {
    let sensing = make_sensing_with(p, m, seed, Regime::Unrestricted).unwrap();
    let mut rng = SeededRng::new(seed ^ 0xabcd);
    let x = DenseMatrix::random_normal(m, n, &mut rng);
    let m_mat = compress(&sensing, &x).unwrap();
    Problem { m_mat, sensing }
}

pub fn syn(m: usize, k: usize, npc: usize, d: usize, cs: f64, seed: u64) -> SynInstance {
    generate(&SynConfig {
        m,
        n_per_class: npc,
        k,
        subspace_dim: d,
        corruption_size: cs,
        seed,
    })
    .unwrap()
}

/// Largest entry of `|VᵀV − I|`.
pub fn gram_error(v: &DenseMatrix) -> f64 {
    let o = to_oracle(v);
    let mut err: f64 = 0.0;
    for i in 0..o.cols {
        for j in 0..o.cols {
            let dot: f64 = (0..o.rows).map(|t| o.at(t, i) * o.at(t, j)).sum();
            err = err.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    err
}
