// SPDX-License-Identifier: MIT OR Apache-2.0

//! Browser bindings for three interactive views over the bundled
//! 40-sentence sample:
//!
//! - [`layer_view`]: classifier-token GDV, a linear probe for one role and
//!   the MDS map of one layer,
//! - [`tsne_view`]: a t-SNE map of one layer with adjustable perplexity,
//! - [`match_query`]: the part-of-speech query language run on a
//!   hand-tagged sentence.
//!
//! Embeddings come from the deterministic synthetic encoder, so the page
//! needs no model download. Every function returns a JSON string; failures
//! come back as `{"error": "..."}`.

use std::cell::RefCell;

use ascprobe::dataset::bundled_sample;
use ascprobe::extraction::MissingRole;
use ascprobe::projection::ProjectionResult;
use ascprobe::{
    encode_dataset, gather_role_vectors, gdv, match_pattern, mds_project, parse_pattern, train_probe,
    tsne_project, ConstructionLabel, Dialect, EncodedCorpus, EncoderSpec, ProbeConfig, SyntacticRole,
    SyntheticBackend, TsneConfig, WordPieceTokenizer,
};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// A narrower encoder than the 768-wide default keeps the page responsive.
const DEMO_SPEC: EncoderSpec = EncoderSpec {
    hidden_size: 128,
    num_layers: 12,
    num_heads: 12,
    max_sequence_length: 128,
};

thread_local! {
    static CORPUS: RefCell<Option<(u64, EncodedCorpus)>> = const { RefCell::new(None) };
}

fn with_corpus<T>(seed: u64, f: impl FnOnce(&EncodedCorpus) -> T) -> Result<T, String> {
    CORPUS.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.as_ref().is_none_or(|(s, _)| *s != seed) {
            let backend = SyntheticBackend::with_spec(DEMO_SPEC, seed);
            let corpus = encode_dataset(&bundled_sample(), &backend, &WordPieceTokenizer::bundled())
                .map_err(|e| e.to_string())?;
            *slot = Some((seed, corpus));
        }
        Ok(f(&slot.as_ref().expect("corpus was just filled").1))
    })
}

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
    label: ConstructionLabel,
    id: String,
}

fn points(result: &ProjectionResult, labels: &[ConstructionLabel], ids: &[String]) -> Vec<Point> {
    (0..labels.len())
        .map(|i| Point {
            x: result.coords[(i, 0)],
            y: result.coords[(i, 1)],
            label: labels[i],
            id: ids[i].clone(),
        })
        .collect()
}

fn respond(value: Result<serde_json::Value, String>) -> String {
    value.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// GDV of the classifier token, probe accuracy for `role`, and the MDS map
/// of the classifier token at `layer`.
#[wasm_bindgen]
pub fn layer_view(seed: u32, layer: usize, role: &str) -> String {
    respond((|| {
        let role: SyntacticRole = role.parse()?;
        with_corpus(seed.into(), |corpus| {
            let cls = gather_role_vectors(corpus, SyntacticRole::Cls, layer, MissingRole::Error)
                .map_err(|e| e.to_string())?;
            let separation = gdv(&cls.features, &cls.label_ids()).map_err(|e| e.to_string())?;
            let mds = mds_project(&cls.features).map_err(|e| e.to_string())?;
            let role_vectors =
                gather_role_vectors(corpus, role, layer, MissingRole::Skip).map_err(|e| e.to_string())?;
            let probe = train_probe(&role_vectors.features, &role_vectors.label_ids(), &ProbeConfig::default())
                .map(|p| json!({ "mean": p.mean_accuracy, "folds": p.fold_accuracies, "n": p.n_samples, "chance": p.chance() }))
                .unwrap_or_else(|e| json!({ "error": e.to_string() }));
            Ok(json!({
                "layer": layer,
                "gdv": separation,
                "probe": probe,
                "mds": {
                    "quality": mds.quality,
                    "degenerate": mds.degenerate,
                    "points": points(&mds, &cls.labels, &cls.sentence_ids),
                },
            }))
        })?
    })())
}

/// t-SNE map of the classifier token at `layer`.
#[wasm_bindgen]
pub fn tsne_view(seed: u32, layer: usize, perplexity: f64, iterations: usize) -> String {
    respond(with_corpus(seed.into(), |corpus| {
        let cls = gather_role_vectors(corpus, SyntacticRole::Cls, layer, MissingRole::Error)
            .map_err(|e| e.to_string())?;
        let config = TsneConfig {
            perplexity,
            iterations,
            seed: seed.into(),
            exaggeration_iterations: iterations.min(250),
            ..TsneConfig::default()
        };
        let r = tsne_project(&cls.features, &config).map_err(|e| e.to_string())?;
        Ok(json!({
            "layer": layer,
            "quality": r.quality,
            "warnings": r.warnings,
            "kl": r.kl_trace.last(),
            "points": points(&r, &cls.labels, &cls.sentence_ids),
        }))
    })
    .and_then(|r| r))
}

/// Run `query` over `tagged`, written as `word/TAG word/TAG ...`.
#[wasm_bindgen]
pub fn match_query(query: &str, dialect: &str, tagged: &str, max_gap: usize) -> String {
    respond((|| {
        let dialect: Dialect = dialect.parse()?;
        let pattern = match parse_pattern(query, dialect, ConstructionLabel::Resultative) {
            Ok(p) => p,
            Err(e) => return Ok(json!({ "error": e.to_string(), "column": e.column })),
        };
        let sentence: Vec<(String, String)> = tagged
            .split_whitespace()
            .map(|wt| match wt.rsplit_once('/') {
                Some((w, t)) if !w.is_empty() && !t.is_empty() => Ok((w.to_string(), t.to_string())),
                _ => Err(format!("`{wt}` is not word/TAG")),
            })
            .collect::<Result<_, _>>()?;
        let matches: Vec<_> = match_pattern(&pattern, "input", &sentence, max_gap)
            .into_iter()
            .map(|m| {
                json!({
                    "start": m.start,
                    "end": m.end,
                    "words": m.bindings.iter().map(|b| b.word).collect::<Vec<_>>(),
                    "text": sentence[m.start..m.end].iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" "),
                })
            })
            .collect();
        Ok(json!({ "tokens": sentence.iter().map(|(w, _)| w).collect::<Vec<_>>(), "matches": matches }))
    })())
}
