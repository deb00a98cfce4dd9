// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-dimensional projections: classical (Torgerson) MDS and exact t-SNE.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Mds,
    Tsne,
}

impl ProjectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mds => "mds",
            Self::Tsne => "tsne",
        }
    }
}

impl fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mds" => Ok(Self::Mds),
            "tsne" | "t-sne" => Ok(Self::Tsne),
            other => Err(Error::Config(format!("unknown projection method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub method: ProjectionMethod,
    /// `N × 2`.
    pub coords: DMatrix<f64>,
    /// MDS: Pearson correlation of input and output pairwise distances.
    /// t-SNE: final KL divergence.
    pub quality: f64,
    /// MDS found fewer than two positive eigenvalues; missing axes are zero.
    pub degenerate: bool,
    pub warnings: Vec<String>,
    /// Numeric settings actually used (perplexity, learning rate, ...).
    pub parameters: BTreeMap<String, f64>,
    /// t-SNE objective after every iteration.
    pub kl_trace: Vec<f64>,
}

fn check_finite(points: &DMatrix<f64>) -> Result<()> {
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Projection("non-finite input coordinate".into()));
    }
    Ok(())
}

/// Squared Euclidean distances between rows.
pub(crate) fn squared_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (points.row(i) - points.row(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Pearson correlation of the pairwise distances of two point sets.
pub fn distance_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (da, db) = (squared_distances(a), squared_distances(b));
    let n = a.nrows();
    let mut xs = Vec::with_capacity(n * n / 2);
    let mut ys = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            xs.push(da[(i, j)].sqrt());
            ys.push(db[(i, j)].sqrt());
        }
    }
    pearson(&xs, &ys)
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 && syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Classical MDS to two dimensions. Each output column is sign-fixed so its
/// largest-magnitude entry is positive.
pub fn mds_project(points: &DMatrix<f64>) -> Result<ProjectionResult> {
    let n = points.nrows();
    if n < 3 {
        return Err(Error::Projection(format!("MDS needs at least 3 points, got {n}")));
    }
    check_finite(points)?;
    let d2 = squared_distances(points);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = scale * 1e-12;

    let mut coords = DMatrix::zeros(n, 2);
    let mut degenerate = false;
    let mut warnings = Vec::new();
    for axis in 0..2 {
        let k = order[axis];
        let lambda = eig.eigenvalues[k];
        if lambda <= floor || lambda <= 0.0 {
            degenerate = true;
            continue;
        }
        let mut col = eig.eigenvectors.column(k) * lambda.sqrt();
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        coords.set_column(axis, &col);
    }
    if degenerate {
        warnings.push("fewer than two positive eigenvalues; missing axes padded with zeros".into());
    }
    let quality = distance_correlation(points, &coords);
    Ok(ProjectionResult {
        method: ProjectionMethod::Mds,
        coords,
        quality,
        degenerate,
        warnings,
        parameters: BTreeMap::new(),
        kl_trace: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub seed: u64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// `None` uses `N / 12`.
    pub learning_rate: Option<f64>,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            seed: 0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: None,
        }
    }
}

/// Conditional affinities of one point with a bandwidth tuned by bisection
/// so that the entropy equals `ln(perplexity)`.
fn calibrate_row(d2: &DMatrix<f64>, i: usize, perplexity: f64, row: &mut [f64]) {
    let n = d2.nrows();
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
    let min_d = (0..n).filter(|&j| j != i).map(|j| d2[(i, j)]).fold(f64::INFINITY, f64::min);
    for _ in 0..200 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for j in 0..n {
            if j == i {
                row[j] = 0.0;
                continue;
            }
            // shifting by the nearest distance keeps exp() away from underflow
            let dj = d2[(i, j)] - min_d;
            let p = (-beta * dj).exp();
            row[j] = p;
            sum += p;
            weighted += p * dj;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        for v in row.iter_mut() {
            *v /= sum;
        }
        let diff = entropy - target;
        if diff.abs() < 1e-5 {
            return;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
        }
    }
}

/// Exact t-SNE to two dimensions.
///
/// The perplexity is clamped to `(N − 1) / 3` (with a warning) so every
/// point has enough neighbours; a perplexity of `N` or more is an error.
pub fn tsne_project(points: &DMatrix<f64>, config: &TsneConfig) -> Result<ProjectionResult> {
    let n = points.nrows();
    if n < 4 {
        return Err(Error::Projection(format!("t-SNE needs at least 4 points, got {n}")));
    }
    check_finite(points)?;
    if !(config.perplexity > 0.0) || config.perplexity >= n as f64 {
        return Err(Error::Projection(format!(
            "perplexity {} must be positive and below the point count {n}",
            config.perplexity
        )));
    }
    let mut warnings = Vec::new();
    let limit = (n - 1) as f64 / 3.0;
    let perplexity = if config.perplexity > limit {
        warnings.push(format!(
            "perplexity {} clamped to {limit} for {n} points",
            config.perplexity
        ));
        limit.max(1.0)
    } else {
        config.perplexity
    };

    let d2 = squared_distances(points);
    let mut cond = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        calibrate_row(&d2, i, perplexity, &mut row);
        for j in 0..n {
            cond[(i, j)] = row[j];
        }
    }
    let p = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            ((cond[(i, j)] + cond[(j, i)]) / (2.0 * n as f64)).max(1e-12)
        }
    });

    let learning_rate = config.learning_rate.unwrap_or(n as f64 / 12.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0f64; n * n];
    let mut kl_trace = Vec::with_capacity(config.iterations);

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.exaggeration_iterations { 0.5 } else { 0.8 };

        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                total += 2.0 * v;
            }
        }
        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let q = (w / total).max(1e-12);
                let m = 4.0 * (exaggeration * p[(i, j)] - q) * w;
                grad[0] += m * (y[i][0] - y[j][0]);
                grad[1] += m * (y[i][1] - y[j][1]);
            }
            for a in 0..2 {
                let same_sign = (grad[a] > 0.0) == (update[i][a] > 0.0);
                gains[i][a] = if same_sign { gains[i][a] * 0.8 } else { gains[i][a] + 0.2 };
                gains[i][a] = gains[i][a].max(0.01);
                update[i][a] = momentum * update[i][a] - learning_rate * gains[i][a] * grad[a];
            }
        }
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
        }

        let mut kl = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                total += 2.0 * v;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let q = (num[i * n + j] / total).max(1e-12);
                let pij = p[(i, j)];
                kl += 2.0 * pij * (pij / q).ln();
            }
        }
        kl_trace.push(kl);
    }

    let mut coords = DMatrix::zeros(n, 2);
    for (i, yi) in y.iter().enumerate() {
        coords[(i, 0)] = yi[0];
        coords[(i, 1)] = yi[1];
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::Projection("t-SNE diverged to non-finite coordinates".into()));
    }
    let parameters = BTreeMap::from([
        ("perplexity".to_string(), perplexity),
        ("requested_perplexity".to_string(), config.perplexity),
        ("learning_rate".to_string(), learning_rate),
        ("iterations".to_string(), config.iterations as f64),
        ("early_exaggeration".to_string(), config.early_exaggeration),
        ("exaggeration_iterations".to_string(), config.exaggeration_iterations as f64),
        ("seed".to_string(), config.seed as f64),
    ]);
    Ok(ProjectionResult {
        method: ProjectionMethod::Tsne,
        coords,
        quality: kl_trace.last().copied().unwrap_or(0.0),
        degenerate: false,
        warnings,
        parameters,
        kl_trace,
    })
}
