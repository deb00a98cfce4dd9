// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cluster separation (GDV) and attention discriminability (FDR).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{ConstructionLabel, SyntacticRole};
use crate::error::{Error, Result};
use crate::extraction::EncodedCorpus;
use crate::util::par_map;

/// Denominator guard for [`fdr_pair`] when both variances vanish.
pub const FDR_EPSILON: f64 = 1e-12;

/// Z-score every column to mean 0 and standard deviation 0.5 (population
/// statistics). Constant columns become 0.
pub fn gdv_standardize(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows() as f64;
    let mut out = points.clone();
    for mut col in out.column_iter_mut() {
        let (min, max) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if min == max {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd == 0.0 {
            col.fill(0.0);
            continue;
        }
        col.apply(|v| *v = 0.5 * (*v - mean) / sd);
    }
    out
}

/// Generalized Discrimination Value of labeled points (rows).
///
/// After [`gdv_standardize`], the mean Euclidean distance within each class
/// is averaged over classes, the mean distance between each pair of classes
/// is averaged over class pairs, and the difference is divided by `√D`.
/// Negative values mean tighter-than-chance clusters.
///
/// Class ids are arbitrary; only equality matters.
pub fn gdv(points: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let (n, d) = points.shape();
    if labels.len() != n {
        return Err(Error::Metric(format!("{n} points but {} labels", labels.len())));
    }
    if d == 0 {
        return Err(Error::Metric("points have no dimensions".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Metric("non-finite coordinate".into()));
    }
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::Metric("GDV needs at least two classes".into()));
    }
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label collected above"))
        .collect();
    let k = classes.len();
    let mut sizes = vec![0usize; k];
    for &c in &class_of {
        sizes[c] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s < 2) {
        return Err(Error::Metric(format!(
            "class {} has {} point(s), at least 2 needed",
            classes[c], sizes[c]
        )));
    }

    // contiguous rows make the pair loop cache friendly
    let z = gdv_standardize(points).transpose();
    let rows: Vec<&[f64]> = (0..n).map(|i| &z.as_slice()[i * d..(i + 1) * d]).collect();
    let indices: Vec<usize> = (0..n).collect();
    let partials = par_map(&indices, |&i| {
        let mut sums = vec![0.0f64; k * k];
        for j in (i + 1)..n {
            let dist = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let (a, b) = (class_of[i].min(class_of[j]), class_of[i].max(class_of[j]));
            sums[a * k + b] += dist;
        }
        sums
    });
    let mut sums = vec![0.0f64; k * k];
    for p in partials {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }

    let mut intra = 0.0;
    for c in 0..k {
        let pairs = (sizes[c] * (sizes[c] - 1) / 2) as f64;
        intra += sums[c * k + c] / pairs;
    }
    intra /= k as f64;
    let mut inter = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            inter += sums[a * k + b] / (sizes[a] * sizes[b]) as f64;
        }
    }
    inter /= (k * (k - 1) / 2) as f64;
    Ok((intra - inter) / (d as f64).sqrt())
}

/// Total attention flowing into `token` from source positions, read from a
/// row-major `len × len` matrix whose rows are sources.
pub fn incoming_attention(attention: &[f32], len: usize, token: usize, include_self: bool) -> Result<f64> {
    if attention.len() != len * len {
        return Err(Error::Metric(format!(
            "attention has {} entries, expected {len}×{len}",
            attention.len()
        )));
    }
    if token >= len {
        return Err(Error::Metric(format!("token index {token} out of range for length {len}")));
    }
    Ok((0..len)
        .filter(|&i| include_self || i != token)
        .map(|i| f64::from(attention[i * len + token]))
        .sum())
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Fisher discriminant ratio with a flag set when both samples have zero
/// variance but different means (the ratio is then taken against
/// [`FDR_EPSILON`]).
pub fn fdr_pair_checked(a: &[f64], b: &[f64]) -> Result<(f64, bool)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("FDR needs two non-empty samples".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let num = (ma - mb) * (ma - mb);
    if num == 0.0 {
        return Ok((0.0, false));
    }
    let den = va + vb;
    if den == 0.0 {
        return Ok((num / FDR_EPSILON, true));
    }
    Ok((num / den, false))
}

/// `(mean_a − mean_b)² / (var_a + var_b)` with population variances.
pub fn fdr_pair(a: &[f64], b: &[f64]) -> Result<f64> {
    fdr_pair_checked(a, b).map(|(v, _)| v)
}

/// FDR for one unordered pair of constructions. `fdr` is `None` when either
/// construction has no sentence carrying the role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFdr {
    pub a: ConstructionLabel,
    pub b: ConstructionLabel,
    pub fdr: Option<f64>,
    pub degenerate: bool,
}

/// FDRs of one role's incoming attention at one layer and head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrResult {
    pub layer: usize,
    pub head: usize,
    pub role: SyntacticRole,
    pub pairs: Vec<PairFdr>,
    /// Mean over the pairs that are present; `None` if none are.
    pub mean_over_pairs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FdrSweep {
    pub results: Vec<FdrResult>,
    /// Sentences lacking each role, left out of that role's distributions.
    pub skipped: BTreeMap<SyntacticRole, usize>,
}

impl FdrSweep {
    /// Mean over heads of the per-head means, per (layer, role).
    pub fn head_means(&self) -> BTreeMap<(usize, SyntacticRole), f64> {
        let mut acc: BTreeMap<(usize, SyntacticRole), (f64, usize)> = BTreeMap::new();
        for r in &self.results {
            if let Some(m) = r.mean_over_pairs {
                let e = acc.entry((r.layer, r.role)).or_default();
                e.0 += m;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
    }
}

/// Per-(layer, head, role) FDRs over all six construction pairs. Layers
/// are 1-based attention layers, heads 0-based.
pub fn fdr_sweep(
    corpus: &EncodedCorpus,
    roles: &[SyntacticRole],
    layers: &[usize],
    heads: &[usize],
) -> Result<FdrSweep> {
    let spec = corpus.spec;
    if let Some(&l) = layers.iter().find(|&&l| l == 0 || l > spec.num_layers) {
        return Err(Error::Config(format!(
            "attention layer {l} out of range 1..={}",
            spec.num_layers
        )));
    }
    if let Some(&h) = heads.iter().find(|&&h| h >= spec.num_heads) {
        return Err(Error::Config(format!("head {h} out of range 0..{}", spec.num_heads)));
    }
    let mut sweep = FdrSweep::default();
    let mut cells = Vec::new();
    for &role in roles {
        let carriers: Vec<_> = corpus
            .entries
            .iter()
            .filter_map(|e| e.alignment.token(role).map(|t| (e, t)))
            .collect();
        sweep.skipped.insert(role, corpus.entries.len() - carriers.len());
        for &layer in layers {
            for &head in heads {
                cells.push((role, layer, head, carriers.clone()));
            }
        }
    }
    let results = par_map(&cells, |(role, layer, head, carriers)| -> Result<FdrResult> {
        let mut by_label: BTreeMap<ConstructionLabel, Vec<f64>> = BTreeMap::new();
        for (entry, token) in carriers {
            let s = &entry.encoded;
            let v = incoming_attention(s.attention(*layer, *head), s.length, *token, false)?;
            by_label.entry(entry.label).or_default().push(v);
        }
        let mut pairs = Vec::with_capacity(6);
        for (i, &a) in ConstructionLabel::ALL.iter().enumerate() {
            for &b in &ConstructionLabel::ALL[i + 1..] {
                let (fdr, degenerate) = match (by_label.get(&a), by_label.get(&b)) {
                    (Some(xa), Some(xb)) => {
                        let (v, flag) = fdr_pair_checked(xa, xb)?;
                        (Some(v), flag)
                    }
                    _ => (None, false),
                };
                pairs.push(PairFdr { a, b, fdr, degenerate });
            }
        }
        let present: Vec<f64> = pairs.iter().filter_map(|p| p.fdr).collect();
        let mean_over_pairs =
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        Ok(FdrResult {
            layer: *layer,
            head: *head,
            role: *role,
            pairs,
            mean_over_pairs,
        })
    });
    sweep.results = results.into_iter().collect::<Result<_>>()?;
    Ok(sweep)
}
