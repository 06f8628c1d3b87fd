//! K-Means on row-space bases, label alignment and clustering accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, SeededRng};
use crate::sensing::SensingMatrix;
use crate::solver::{solve, RowSpaceBasis, RspParams, RspSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Largest centroid movement treated as converged.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 300,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster of each point in `[0, k)`, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub restarts_used: usize,
}

/// One Lloyd run from fixed initial centroids.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: DenseMatrix,
    /// Inertia after every assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl LloydRun {
    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().expect("at least one assignment")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `n × n` matrix of squared Euclidean distances between rows.
pub fn pairwise_sq_distances(points: &DenseMatrix) -> DenseMatrix {
    let n = points.rows();
    DenseMatrix::from_fn(n, n, |i, j| sq_dist(points.row(i), points.row(j)))
}

/// k-means++ seeding: first center uniform, then proportional to D².
fn kmeanspp(points: &DenseMatrix, k: usize, rng: &mut SeededRng) -> DenseMatrix {
    let n = points.rows();
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.below(n as u64) as usize);
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            rng.below(n as u64) as usize
        };
        centers.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    let dim = points.cols();
    DenseMatrix::from_fn(k, dim, |c, j| points[(centers[c], j)])
}

fn assign(points: &DenseMatrix, centroids: &DenseMatrix, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for i in 0..points.rows() {
        let mut best = (f64::INFINITY, 0);
        for c in 0..centroids.rows() {
            let d = sq_dist(points.row(i), centroids.row(c));
            if d < best.0 {
                best = (d, c);
            }
        }
        labels[i] = best.1;
        dists[i] = best.0;
        inertia += best.0;
    }
    inertia
}

/// Lloyd iterations from `initial` centroids. An empty cluster is re-seeded
/// at the point farthest from its current centroid.
pub fn lloyd(points: &DenseMatrix, initial: DenseMatrix, max_iters: usize, tol: f64) -> LloydRun {
    let (n, dim) = points.shape();
    let k = initial.rows();
    let mut centroids = initial;
    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let inertia = assign(points, &centroids, &mut labels, &mut dists);
        trace.push(inertia);
        if iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                counts[c] = 1;
                labels[i] = c;
                dists[i] = 0.0;
            }
        }

        let mut sums = DenseMatrix::zeros(k, dim);
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..dim {
                sums[(l, j)] += points[(i, j)];
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut shift = 0.0;
            for j in 0..dim {
                let mean = sums[(c, j)] / counts[c] as f64;
                shift += (mean - centroids[(c, j)]).powi(2);
                centroids[(c, j)] = mean;
            }
            movement = movement.max(shift.sqrt());
        }
        if movement <= tol {
            let inertia = assign(points, &centroids, &mut labels, &mut dists);
            trace.push(inertia);
            break;
        }
    }
    LloydRun {
        labels,
        centroids,
        inertia_trace: trace,
        iterations,
    }
}

/// Renumbers labels in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// K-Means with the default configuration.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_with(points, k, seed, &KMeansConfig::default())
}

/// Best of `cfg.restarts` k-means++/Lloyd runs by inertia; restart `i` uses
/// seed `derive_seed(seed, [i])` and ties go to the lowest restart index.
pub fn kmeans_with(points: &DenseMatrix, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k must be in 1..={n}, got {k}")));
    }
    if cfg.restarts == 0 {
        return Err(Error::param("k-means needs at least one restart"));
    }
    let mut best: Option<LloydRun> = None;
    for restart in 0..cfg.restarts {
        let mut rng = SeededRng::new(derive_seed(seed, &[restart as u64]));
        let init = kmeanspp(points, k, &mut rng);
        let run = lloyd(points, init, cfg.max_iters, cfg.tol);
        if best.as_ref().map_or(true, |b| run.inertia() < b.inertia()) {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");
    Ok(ClusterAssignment {
        labels: canonical_labels(&best.labels),
        k,
        inertia: best.inertia(),
        restarts_used: cfg.restarts,
    })
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method with
/// potentials). Returns the column assigned to each row.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<usize> {
    let n = weights.len();
    // Minimize negated weights; 1-based arrays with a virtual column 0.
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of points grouped correctly under the best one-to-one matching
/// between predicted and true labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::param(format!(
            "label lengths differ: {} predicted vs {} true",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let pred = canonical_labels(predicted);
    let tru = canonical_labels(truth);
    let size = pred.iter().chain(&tru).max().map_or(0, |&m| m + 1);
    let mut confusion = vec![vec![0i64; size]; size];
    for (&p, &t) in pred.iter().zip(&tru) {
        confusion[p][t] += 1;
    }
    let matching = max_weight_assignment(&confusion);
    let correct: i64 = matching
        .iter()
        .enumerate()
        .map(|(p, &t)| confusion[p][t])
        .sum();
    Ok(correct as f64 / truth.len() as f64)
}

/// Feature map applied to the rows of `V̂` before K-Means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowEmbedding {
    /// Rows of `V̂` as they are.
    Raw,
    /// Each row `v` mapped to `vec(v̂ v̂ᵀ)` with `v̂ = v/‖v‖`.
    ///
    /// Rows from one subspace of an independent union span a common subspace
    /// of ℝʳ but are centred at the origin, so raw K-Means tends to split
    /// them by sign. Under the lift, rows from different subspaces have inner
    /// product `(v̂ᵀŵ)² = 0` while the lift of each class has a nonzero mean.
    /// Inner products `(v̂ᵀŵ)²` are unchanged by `V̂ ↦ V̂B` for orthogonal `B`.
    #[default]
    Lifted,
}

impl RowEmbedding {
    pub fn apply(self, v: &DenseMatrix) -> DenseMatrix {
        match self {
            RowEmbedding::Raw => v.clone(),
            RowEmbedding::Lifted => {
                let (n, r) = v.shape();
                // Upper triangle, off-diagonal entries weighted by √2 so that
                // Euclidean geometry matches the full r² outer product.
                let width = r * (r + 1) / 2;
                let mut out = DenseMatrix::zeros(n, width);
                for i in 0..n {
                    let row = v.row(i);
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    let mut col = 0;
                    for a in 0..r {
                        for b in a..r {
                            let w = if a == b { 1.0 } else { std::f64::consts::SQRT_2 };
                            out[(i, col)] = w * row[a] * row[b] / (norm * norm);
                            col += 1;
                        }
                    }
                }
                out
            }
        }
    }
}

/// K-Means on the (embedded) rows of a row-space basis.
pub fn cluster_rows(v: &RowSpaceBasis, k: usize, seed: u64, embedding: RowEmbedding) -> Result<ClusterAssignment> {
    kmeans(&embedding.apply(v.matrix()), k, seed)
}

#[derive(Debug, Clone)]
pub struct CompressedClustering {
    pub assignment: ClusterAssignment,
    pub solution: RspSolution,
}

/// Clusters the points behind `M = RX`: optional column normalization of
/// `M`, RSP for `V̂`, then K-Means on its rows.
pub fn cluster_compressed(
    m_mat: &DenseMatrix,
    r_mat: &SensingMatrix,
    k: usize,
    params: &RspParams,
    normalize: bool,
    seed: u64,
) -> Result<ClusterAssignment> {
    Ok(cluster_compressed_detailed(m_mat, r_mat, k, params, normalize, seed, RowEmbedding::default())?.assignment)
}

pub fn cluster_compressed_detailed(
    m_mat: &DenseMatrix,
    r_mat: &SensingMatrix,
    k: usize,
    params: &RspParams,
    normalize: bool,
    seed: u64,
    embedding: RowEmbedding,
) -> Result<CompressedClustering> {
    if k == 0 || k > m_mat.cols() {
        return Err(Error::param(format!("k must be in 1..={}, got {k}", m_mat.cols())));
    }
    let input = if normalize {
        m_mat.normalize_columns()
    } else {
        m_mat.clone()
    };
    let solution = solve(&input, r_mat, params)?;
    let assignment = cluster_rows(&solution.row_space, k, seed, embedding)?;
    Ok(CompressedClustering { assignment, solution })
}
