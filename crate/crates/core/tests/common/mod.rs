// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `k` isotropic Gaussian clusters of `per` points in `d` dimensions. Each
/// center sits `sep` along its own axis, so centers are `sep·√2` apart.
pub fn gaussian_clusters(per: usize, k: usize, d: usize, sep: f64, sigma: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let n = per * k;
    let mut m = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        for p in 0..per {
            let row = c * per + p;
            for j in 0..d {
                m[(row, j)] = noise.sample(&mut rng) + if j == c % d { sep } else { 0.0 };
            }
            labels.push(c);
        }
    }
    (m, labels)
}

pub fn random_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0))
}

/// GDV computed the slow, literal way: z-score each column separately,
/// then loop over every intra-class and inter-class pair.
pub fn naive_gdv(points: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let (n, d) = points.shape();
    let mut z = vec![vec![0.0; d]; n];
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| points[(i, j)]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let constant = col.iter().all(|&v| v == col[0]);
        for i in 0..n {
            z[i][j] = if constant || var == 0.0 {
                0.0
            } else {
                0.5 * (col[i] - mean) / var.sqrt()
            };
        }
    }
    let dist = |a: usize, b: usize| -> f64 { (0..d).map(|j| (z[a][j] - z[b][j]).powi(2)).sum::<f64>().sqrt() };
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let members = |c: usize| -> Vec<usize> { (0..n).filter(|&i| labels[i] == c).collect() };

    let mut intra = 0.0;
    for &c in &classes {
        let m = members(c);
        let mut s = 0.0;
        let mut count = 0.0;
        for a in 0..m.len() {
            for b in (a + 1)..m.len() {
                s += dist(m[a], m[b]);
                count += 1.0;
            }
        }
        intra += s / count;
    }
    intra /= classes.len() as f64;

    let mut inter = 0.0;
    let mut pairs = 0.0;
    for x in 0..classes.len() {
        for y in (x + 1)..classes.len() {
            let (ma, mb) = (members(classes[x]), members(classes[y]));
            let mut s = 0.0;
            for &a in &ma {
                for &b in &mb {
                    s += dist(a, b);
                }
            }
            inter += s / (ma.len() * mb.len()) as f64;
            pairs += 1.0;
        }
    }
    inter /= pairs;
    (intra - inter) / (d as f64).sqrt()
}

/// Best-of-restarts Lloyd k-means on 2-D rows; returns cluster ids.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Vec<usize> {
    let n = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: (f64, Vec<usize>) = (f64::INFINITY, vec![0; n]);
    for _ in 0..10 {
        // k-means++ seeding
        let mut centers = vec![points.row(rng.random_range(0..n)).into_owned()];
        while centers.len() < k {
            let d2: Vec<f64> = (0..n)
                .map(|i| centers.iter().map(|c| (points.row(i) - c).norm_squared()).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d2.iter().sum();
            let mut t = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if t < *v {
                    pick = i;
                    break;
                }
                t -= v;
            }
            centers.push(points.row(pick).into_owned());
        }
        let mut assign = vec![0; n];
        for _ in 0..100 {
            for i in 0..n {
                assign[i] = (0..k)
                    .min_by(|&a, &b| {
                        (points.row(i) - &centers[a])
                            .norm_squared()
                            .total_cmp(&(points.row(i) - &centers[b]).norm_squared())
                    })
                    .unwrap();
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
                if !members.is_empty() {
                    let mut sum = points.row(members[0]) * 0.0;
                    for &i in &members {
                        sum += points.row(i);
                    }
                    *center = sum / members.len() as f64;
                }
            }
        }
        let inertia: f64 = (0..n).map(|i| (points.row(i) - &centers[assign[i]]).norm_squared()).sum();
        if inertia < best.0 {
            best = (inertia, assign);
        }
    }
    best.1
}

/// Fraction of points whose cluster's majority class is their own class.
pub fn purity(clusters: &[usize], labels: &[usize]) -> f64 {
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; c]; k];
    for (&a, &l) in clusters.iter().zip(labels) {
        table[a][l] += 1;
    }
    table.iter().map(|row| row.iter().max().copied().unwrap_or(0)).sum::<usize>() as f64 / labels.len() as f64
}

/// Largest coordinate error after the optimal rotation/reflection and
/// translation of `a` onto `b` (orthogonal Procrustes).
pub fn procrustes_max_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let center = |m: &DMatrix<f64>| {
        let mean = m.row_mean();
        let mut c = m.clone();
        for mut row in c.row_iter_mut() {
            row -= &mean;
        }
        c
    };
    let (ca, cb) = (center(a), center(b));
    let svd = (ca.transpose() * &cb).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let aligned = ca * r;
    (aligned - cb).abs().max()
}

pub fn pairwise_distances(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((m.row(i) - m.row(j)).norm());
        }
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
