mod common;

use common::{random_problem, syn};
use proptest::prelude::*;
use rsp_core::clustering::{cluster_rows, kmeans_with, lloyd, pairwise_sq_distances};
use rsp_core::metrics::principal_angles;
use rsp_core::{
    accuracy, cluster_compressed, compress, kmeans, make_sensing, pca_rowspace, projector_snr, score_of_snr,
    sim_cluster, truncated_svd, DenseMatrix, KMeansConfig, RowEmbedding, RspParams, SeededRng,
};

/// Accuracy by enumerating every relabelling of the predicted clusters.
fn brute_force_accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let k = predicted.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permutations(&mut perm, 0, &mut |p| {
        let hits = predicted.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / truth.len() as f64
}

fn permutations(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn shuffle(v: &mut [usize], rng: &mut SeededRng) {
    for i in (1..v.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        v.swap(i, j);
    }
}

fn random_orthogonal(r: usize, rng: &mut SeededRng) -> DenseMatrix {
    truncated_svd(&DenseMatrix::random_normal(r, r, rng), r).unwrap().left_vectors
}

#[test]
fn hand_worked_accuracy() {
    assert_eq!(accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
    assert_eq!(brute_force_accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]), 0.5);
    assert_eq!(accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert!(accuracy(&[0, 1], &[0]).is_err());
}

proptest! {
    #[test]
    fn accuracy_matches_brute_force(
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..30)
    ) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let got = accuracy(&pred, &truth).unwrap();
        prop_assert!((got - brute_force_accuracy(&pred, &truth)).abs() < 1e-15);
        prop_assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_ignores_label_names(
        pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..40),
        seed in any::<u64>(),
    ) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let base = accuracy(&pred, &truth).unwrap();
        let mut rng = SeededRng::new(seed);
        for _ in 0..20 {
            let mut names: Vec<usize> = (0..5).collect();
            shuffle(&mut names, &mut rng);
            let renamed: Vec<usize> = pred.iter().map(|&l| names[l]).collect();
            prop_assert_eq!(accuracy(&renamed, &truth).unwrap(), base);
        }
    }
}

#[test]
fn separated_clouds_are_found() {
    let mut rng = SeededRng::new(1);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (c, center) in [[-10.0, 0.0], [10.0, 5.0], [0.0, 20.0]].iter().enumerate() {
        for _ in 0..15 {
            rows.push(vec![center[0] + rng.normal(), center[1] + rng.normal()]);
            truth.push(c);
        }
    }
    let points = DenseMatrix::from_rows(&rows).unwrap();
    let fit = kmeans(&points, 3, 4).unwrap();
    assert_eq!(accuracy(&fit.labels, &truth).unwrap(), 1.0);
    assert!(fit.labels.iter().all(|&l| l < 3));
}

#[test]
fn one_cluster_per_point_has_zero_inertia() {
    let mut rng = SeededRng::new(2);
    let points = DenseMatrix::random_normal(7, 3, &mut rng);
    let fit = kmeans(&points, 7, 0).unwrap();
    assert_eq!(fit.inertia, 0.0);
    let mut labels = fit.labels.clone();
    labels.sort_unstable();
    assert_eq!(labels, (0..7).collect::<Vec<_>>());
    assert!(kmeans(&points, 8, 0).is_err());
}

#[test]
fn kmeans_is_deterministic_given_seed() {
    let mut rng = SeededRng::new(3);
    let points = DenseMatrix::random_normal(60, 4, &mut rng);
    let cfg = KMeansConfig::default();
    assert_eq!(kmeans_with(&points, 4, 9, &cfg).unwrap(), kmeans_with(&points, 4, 9, &cfg).unwrap());
}

#[test]
fn lloyd_inertia_never_increases() {
    let mut rng = SeededRng::new(4);
    for _ in 0..10 {
        let points = DenseMatrix::random_normal(80, 3, &mut rng);
        let init = DenseMatrix::random_normal(5, 3, &mut rng);
        let run = lloyd(&points, init, 300, 1e-9);
        for w in run.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn pairwise_distances_survive_orthogonal_rotation() {
    let mut rng = SeededRng::new(5);
    for r in [2, 3, 6] {
        let inst = syn(30, 2, 12, r / 2, 0.0, r as u64);
        let v = inst.true_row_space().unwrap();
        let rotated = v.matrix().matmul(&random_orthogonal(v.dim(), &mut rng)).unwrap();
        for embedding in [RowEmbedding::Raw, RowEmbedding::Lifted] {
            let a = pairwise_sq_distances(&embedding.apply(v.matrix()));
            let b = pairwise_sq_distances(&embedding.apply(&rotated));
            assert!(a.sub(&b).unwrap().max_abs() < 1e-10, "{embedding:?}");
        }
    }
}

#[test]
fn block_diagonal_row_space_clusters_exactly() {
    for (k, d, seed) in [(2, 1, 1), (2, 3, 2), (3, 2, 3), (5, 2, 4)] {
        let inst = syn(60, k, 20, d, 0.0, seed);
        let v0 = inst.true_row_space().unwrap();
        // Rows from different subspaces are orthogonal in V₀.
        let g = v0.matrix().matmul(&v0.matrix().transpose()).unwrap();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                if inst.labels[i] != inst.labels[j] {
                    assert!(g[(i, j)].abs() < 1e-10);
                }
            }
        }
        let fit = cluster_rows(&v0, k, seed, RowEmbedding::default()).unwrap();
        assert_eq!(accuracy(&fit.labels, &inst.labels).unwrap(), 1.0, "k={k} d={d}");
    }
}

#[test]
fn compressed_clean_data_clusters_exactly() {
    for seed in 0..3 {
        let inst = syn(200, 2, 100, 1, 0.0, seed);
        let sensing = make_sensing(50, 200, seed + 50).unwrap();
        let m_mat = compress(&sensing, &inst.observed).unwrap();
        let fit = cluster_compressed(&m_mat, &sensing, 2, &RspParams::new(2, 2f64.powi(-7)), false, seed).unwrap();
        assert_eq!(accuracy(&fit.labels, &inst.labels).unwrap(), 1.0);
    }
}

#[test]
fn single_cluster_is_all_zero() {
    let prob = random_problem(10, 20, 15, 1);
    let fit = cluster_compressed(&prob.m_mat, &prob.sensing, 1, &RspParams::new(2, 0.1), true, 0).unwrap();
    assert!(fit.labels.iter().all(|&l| l == 0));
    assert_eq!(accuracy(&fit.labels, &[0; 15]).unwrap(), 1.0);
}

#[test]
fn corrupted_corner_instance_clusters() {
    let inst = syn(200, 2, 100, 1, 0.4, 8);
    let sensing = make_sensing(50, 200, 9).unwrap();
    let m_mat = compress(&sensing, &inst.observed).unwrap();
    let fit = cluster_compressed(&m_mat, &sensing, 2, &RspParams::new(2, 2f64.powi(-7)), false, 1).unwrap();
    assert!(accuracy(&fit.labels, &inst.labels).unwrap() >= 0.99);
}

#[test]
fn baselines_degrade_under_heavy_corruption() {
    let inst = syn(200, 2, 100, 1, 6.0, 10);
    let sensing = make_sensing(50, 200, 11).unwrap();
    let m_mat = compress(&sensing, &inst.observed).unwrap();
    let snr = projector_snr(&inst.true_row_space().unwrap(), &pca_rowspace(&m_mat, 2).unwrap()).unwrap();
    assert!(snr < 15.0, "pca snr {snr}");
    assert_eq!(score_of_snr(snr), 0.0);
}

#[test]
fn baselines_are_exact_without_corruption() {
    let inst = syn(200, 2, 100, 1, 0.0, 12);
    let sensing = make_sensing(50, 200, 13).unwrap();
    let m_mat = compress(&sensing, &inst.observed).unwrap();
    let v0 = inst.true_row_space().unwrap();
    let pca = pca_rowspace(&m_mat, 2).unwrap();
    assert!(projector_snr(&v0, &pca).unwrap() >= 30.0);
    assert!(principal_angles(&v0, &pca).unwrap().iter().all(|&a| a < 1e-6));
    let fit = sim_cluster(&m_mat, 2, 2, 0).unwrap();
    assert_eq!(accuracy(&fit.labels, &inst.labels).unwrap(), 1.0);
}
