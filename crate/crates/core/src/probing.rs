// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear diagnostic classifiers with stratified cross-validation.
//!
//! Each probe is a one-vs-rest linear SVM (hinge loss, L2 penalty, bias term)
//! trained by dual coordinate descent over the samples in their given order.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SyntacticRole;
use crate::error::{Error, Result};
use crate::extraction::{gather_role_vectors, EncodedCorpus, MissingRole};
use crate::util::{mix64, par_map};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub folds: usize,
    pub seed: u64,
    /// SVM `C`.
    pub regularization_strength: f64,
    /// Cap on passes over the training data.
    pub max_iterations: usize,
    pub tolerance: f64,
    pub standardize_features: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            regularization_strength: 1.0,
            max_iterations: 10_000,
            tolerance: 1e-4,
            standardize_features: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub layer: Option<usize>,
    pub role: Option<SyntacticRole>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub n_samples: usize,
    pub n_classes: usize,
    pub seed: u64,
    /// Folds whose optimizer hit the iteration cap before converging.
    pub unconverged_folds: usize,
}

impl ProbeReport {
    pub fn chance(&self) -> f64 {
        1.0 / self.n_classes as f64
    }
}

/// Assign each sample to a fold. Within every class the samples are
/// shuffled (seeded) and dealt round-robin, continuing the dealer position
/// across classes so fold sizes stay balanced too.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Probe(format!("need at least 2 folds, got {folds}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut dealer = 0;
    for (&class, members) in &mut by_class {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(class as u64)));
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = dealer % folds;
            dealer += 1;
        }
        for fold in 0..folds {
            if !members.iter().any(|&i| assignment[i] == fold) {
                return Err(Error::Probe(format!(
                    "fold {fold} lacks class {class} ({} samples for {folds} folds)",
                    members.len()
                )));
            }
        }
    }
    Ok(assignment)
}

/// Binary hinge-loss SVM in dual form over a precomputed kernel
/// `K = X Xᵀ + 1`. Returns the dual coefficients `αᵢyᵢ` and whether the
/// projected-gradient gap fell below the tolerance.
fn train_binary(kernel: &DMatrix<f64>, y: &[f64], c: f64, max_iter: usize, tol: f64) -> (Vec<f64>, bool) {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0f64; n];
    for _ in 0..max_iter {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for i in 0..n {
            let g = grad[i];
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg == 0.0 {
                continue;
            }
            let qii = kernel[(i, i)];
            let old = alpha[i];
            alpha[i] = (old - g / qii).clamp(0.0, c);
            let delta = (alpha[i] - old) * y[i];
            if delta != 0.0 {
                for j in 0..n {
                    grad[j] += y[j] * kernel[(i, j)] * delta;
                }
            }
        }
        if pg_max - pg_min < tol {
            return (coefficients(&alpha, y), true);
        }
    }
    (coefficients(&alpha, y), false)
}

fn coefficients(alpha: &[f64], y: &[f64]) -> Vec<f64> {
    alpha.iter().zip(y).map(|(a, y)| a * y).collect()
}

fn standardize(train: &mut DMatrix<f64>, test: &mut DMatrix<f64>) {
    let n = train.nrows() as f64;
    for j in 0..train.ncols() {
        let mean = train.column(j).sum() / n;
        let var = train.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        train.column_mut(j).apply(|v| *v = (*v - mean) / sd);
        test.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Train on `train` rows, predict `test` rows; returns predicted class
/// positions (into `classes`) and convergence.
fn fit_predict(
    features: &DMatrix<f64>,
    classes: &[usize],
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    config: &ProbeConfig,
) -> (Vec<usize>, bool) {
    let mut xtr = select_rows(features, train);
    let mut xte = select_rows(features, test);
    if config.standardize_features {
        standardize(&mut xtr, &mut xte);
    }
    let kernel = xtr.clone() * xtr.transpose();
    let kernel = kernel.add_scalar(1.0);
    let cross = (&xte * xtr.transpose()).add_scalar(1.0);
    let mut scores = DMatrix::<f64>::zeros(test.len(), classes.len());
    let mut converged = true;
    for (k, &class) in classes.iter().enumerate() {
        let y: Vec<f64> = train
            .iter()
            .map(|&i| if labels[i] == class { 1.0 } else { -1.0 })
            .collect();
        let (coef, ok) = train_binary(
            &kernel,
            &y,
            config.regularization_strength,
            config.max_iterations,
            config.tolerance,
        );
        converged &= ok;
        for t in 0..test.len() {
            scores[(t, k)] = (0..train.len()).map(|i| coef[i] * cross[(t, i)]).sum();
        }
    }
    let predictions = (0..test.len())
        .map(|t| {
            let mut best = 0;
            for k in 1..classes.len() {
                // strict comparison keeps ties on the lowest class
                if scores[(t, k)] > scores[(t, best)] {
                    best = k;
                }
            }
            best
        })
        .collect();
    (predictions, converged)
}

/// Cross-validated accuracy of a linear probe predicting `labels` from the
/// rows of `features`.
pub fn train_probe(features: &DMatrix<f64>, labels: &[usize], config: &ProbeConfig) -> Result<ProbeReport> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Probe(format!("{n} feature rows but {} labels", labels.len())));
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::Probe(format!(
            "non-finite feature at row {}, column {}",
            pos % n.max(1),
            pos / n.max(1)
        )));
    }
    if !(config.regularization_strength > 0.0) {
        return Err(Error::Probe("regularization strength must be positive".into()));
    }
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::Probe(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }
    if n < config.folds * classes.len() {
        return Err(Error::Probe(format!(
            "{n} samples are too few for {} folds over {} classes",
            config.folds,
            classes.len()
        )));
    }
    let assignment = stratified_folds(labels, config.folds, config.seed)?;
    let mut fold_accuracies = Vec::with_capacity(config.folds);
    let mut unconverged = 0;
    for fold in 0..config.folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == fold);
        for &class in &classes {
            if !test.iter().any(|&i| labels[i] == class) {
                return Err(Error::Probe(format!("fold {fold} lacks class {class}")));
            }
        }
        let (pred, converged) = fit_predict(features, &classes, labels, &train, &test, config);
        if !converged {
            unconverged += 1;
        }
        let correct = test
            .iter()
            .zip(&pred)
            .filter(|(&i, &p)| classes[p] == labels[i])
            .count();
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(ProbeReport {
        layer: None,
        role: None,
        fold_accuracies,
        mean_accuracy,
        n_samples: n,
        n_classes: classes.len(),
        seed: config.seed,
        unconverged_folds: unconverged,
    })
}

/// Accuracy of a probe trained and evaluated on the same rows.
pub fn training_accuracy(features: &DMatrix<f64>, labels: &[usize], config: &ProbeConfig) -> Result<f64> {
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let all: Vec<usize> = (0..features.nrows()).collect();
    let (pred, _) = fit_predict(features, &classes, labels, &all, &all, config);
    let correct = all.iter().zip(&pred).filter(|(&i, &p)| classes[p] == labels[i]).count();
    Ok(correct as f64 / all.len().max(1) as f64)
}

/// A grid cell that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsentCell {
    pub layer: usize,
    pub role: SyntacticRole,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub cells: Vec<ProbeReport>,
    pub absent: Vec<AbsentCell>,
}

impl ProbeGrid {
    pub fn get(&self, layer: usize, role: SyntacticRole) -> Option<&ProbeReport> {
        self.cells
            .iter()
            .find(|c| c.layer == Some(layer) && c.role == Some(role))
    }
}

/// One probe per (layer, role). Sentences lacking a role are left out of
/// that role's cells; cells that cannot be trained are listed as absent.
pub fn probe_sweep(
    corpus: &EncodedCorpus,
    roles: &[SyntacticRole],
    layers: &[usize],
    config: &ProbeConfig,
) -> Result<ProbeGrid> {
    if let Some(&l) = layers.iter().find(|&&l| l > corpus.spec.num_layers) {
        return Err(Error::Config(format!(
            "layer {l} out of range 0..={}",
            corpus.spec.num_layers
        )));
    }
    let cells: Vec<(SyntacticRole, usize)> = roles
        .iter()
        .flat_map(|&r| layers.iter().map(move |&l| (r, l)))
        .collect();
    let outcomes = par_map(&cells, |&(role, layer)| {
        gather_role_vectors(corpus, role, layer, MissingRole::Skip).and_then(|m| {
            train_probe(&m.features, &m.label_ids(), config).map(|mut r| {
                r.layer = Some(layer);
                r.role = Some(role);
                r
            })
        })
    });
    let mut grid = ProbeGrid::default();
    for ((role, layer), outcome) in cells.into_iter().zip(outcomes) {
        match outcome {
            Ok(report) => grid.cells.push(report),
            Err(e) => grid.absent.push(AbsentCell {
                layer,
                role,
                reason: e.to_string(),
            }),
        }
    }
    Ok(grid)
}
