// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use ascprobe::projection::ProjectionMethod;
use ascprobe::{mds_project, tsne_project, TsneConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gaussian_clusters, kmeans, pairwise_distances, pearson, procrustes_max_error, purity, random_matrix};

/// Points that lie in a 2-D plane embedded in `d` dimensions, with the
/// plane coordinates.
fn planar(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-5.0..5.0));
    let basis = random_matrix(d, d, &mut rng).qr().q();
    let embed = basis.columns(0, 2).transpose();
    let offset = DMatrix::from_fn(1, d, |_, _| rng.random_range(-3.0..3.0));
    let mut high = &plane * embed;
    for mut row in high.row_iter_mut() {
        row += &offset;
    }
    (high, plane)
}

#[test]
fn mds_recovers_rank_two_configurations() {
    for seed in 0..10 {
        let (high, plane) = planar(40, 12, seed);
        let r = mds_project(&high).unwrap();
        assert_eq!(r.method, ProjectionMethod::Mds);
        assert!(!r.degenerate);
        assert!(pearson(&pairwise_distances(&high), &pairwise_distances(&r.coords)) >= 0.999);
        assert!(r.quality >= 0.999);
        let err = procrustes_max_error(&r.coords, &plane);
        assert!(err <= 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn mds_of_collinear_points_flags_the_missing_axis() {
    let line = DMatrix::from_fn(10, 3, |i, j| i as f64 * (j + 1) as f64);
    let r = mds_project(&line).unwrap();
    assert!(r.degenerate);
    assert!(r.coords.column(1).iter().all(|&v| v == 0.0));
    assert!(r.quality > 0.999);
}

#[test]
fn mds_rejects_tiny_or_non_finite_input() {
    assert!(mds_project(&DMatrix::zeros(2, 3)).is_err());
    let mut m = DMatrix::zeros(5, 2);
    m[(1, 1)] = f64::NAN;
    assert!(mds_project(&m).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mds_ignores_translation_rotation_and_row_order(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(15, 5, &mut rng);
        let q = random_matrix(5, 5, &mut rng).qr().q();
        let moved = (&x * q).add_scalar(shift);
        let a = mds_project(&x).unwrap();
        let b = mds_project(&moved).unwrap();
        prop_assert!(procrustes_max_error(&a.coords, &b.coords) < 1e-6);

        let order: Vec<usize> = (0..15).rev().collect();
        let permuted = DMatrix::from_fn(15, 5, |i, j| x[(order[i], j)]);
        let c = mds_project(&permuted).unwrap();
        let unpermuted = DMatrix::from_fn(15, 2, |i, j| c.coords[(order.iter().position(|&o| o == i).unwrap(), j)]);
        prop_assert!(procrustes_max_error(&a.coords, &unpermuted) < 1e-6);
    }
}

#[test]
fn tsne_separates_four_clusters_in_high_dimension() {
    let (x, labels) = gaussian_clusters(50, 4, 768, 10.0, 1.0, 21);
    let r = tsne_project(&x, &TsneConfig::default()).unwrap();
    assert_eq!(r.coords.shape(), (200, 2));
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    let p = purity(&kmeans(&r.coords, 4, 0), &labels);
    assert!(p >= 0.9, "purity {p}");
    assert_eq!(r.kl_trace.len(), 1000);
    let tail = &r.kl_trace[950..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{tail:?}");
}

#[test]
fn tsne_is_deterministic_per_seed() {
    let (x, _) = gaussian_clusters(10, 4, 8, 3.0, 0.5, 2);
    let config = TsneConfig { perplexity: 5.0, iterations: 300, ..TsneConfig::default() };
    let a = tsne_project(&x, &config).unwrap();
    let b = tsne_project(&x, &config).unwrap();
    assert_eq!(a.coords, b.coords);
    let c = tsne_project(&x, &TsneConfig { seed: 1, ..config }).unwrap();
    assert_ne!(a.coords, c.coords);
}

#[test]
fn tsne_clamps_perplexity_on_small_inputs() {
    let (x, _) = gaussian_clusters(10, 4, 8, 3.0, 0.5, 3);
    let r = tsne_project(&x, &TsneConfig { iterations: 300, ..TsneConfig::default() }).unwrap();
    assert_eq!(r.warnings.len(), 1, "{:?}", r.warnings);
    assert!(r.warnings[0].contains("clamped"));
    assert_eq!(r.parameters["perplexity"], 13.0);
    assert!(tsne_project(&x, &TsneConfig { perplexity: 40.0, ..TsneConfig::default() }).is_err());
}

#[test]
fn tsne_handles_duplicate_points() {
    let mut x = DMatrix::zeros(20, 3);
    for i in 10..20 {
        x[(i, 0)] = 5.0;
    }
    let r = tsne_project(&x, &TsneConfig { perplexity: 5.0, iterations: 300, ..TsneConfig::default() }).unwrap();
    assert!(r.coords.iter().all(|v| v.is_finite()));
    let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
    assert_eq!(purity(&kmeans(&r.coords, 2, 0), &labels), 1.0);
}
