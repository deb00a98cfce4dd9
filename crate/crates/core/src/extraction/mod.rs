// SPDX-License-Identifier: MIT OR Apache-2.0

//! Running sentences through a frozen encoder and keeping every layer's
//! token embeddings and every head's attention matrix.
//!
//! Layer 0 is the input embedding (after the embedding layer norm); layers
//! `1..=num_layers` are the encoder block outputs. Attention exists for
//! layers `1..=num_layers` only. Attention entry `(i, j)` is the weight
//! source position `i` puts on target position `j`, so rows sum to one.

mod bert;
mod cache;
mod synthetic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alignment::{map_roles_to_tokens, RoleAlignment, WordPieceTokenizer};
use crate::dataset::{ConstructionLabel, SentenceRecord, SyntacticRole};
use crate::error::{Error, Result};
use crate::util::par_map;

pub use bert::{BertBackend, BertConfig};
pub use cache::{read_cache, write_cache, CACHE_FORMAT_VERSION};
pub use synthetic::SyntheticBackend;

/// Tolerance on attention row sums.
pub const ROW_SUM_TOLERANCE: f32 = 1e-4;

/// Encoder dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_sequence_length: usize,
}

impl EncoderSpec {
    /// 12-layer, 12-head, 768-wide base encoder.
    pub const BASE: Self = Self {
        hidden_size: 768,
        num_layers: 12,
        num_heads: 12,
        max_sequence_length: 512,
    };

    /// Number of stored embedding states (input embedding plus each layer).
    pub fn num_states(&self) -> usize {
        self.num_layers + 1
    }
}

/// Raw tensors produced by a backend for one token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `[state][token][dim]`, `num_layers + 1` states.
    pub embeddings: Vec<f32>,
    /// `[layer - 1][head][source][target]`.
    pub attentions: Vec<f32>,
}

/// A frozen encoder. Implementations must be deterministic: the same token
/// ids always produce bit-identical output.
pub trait EncoderBackend: Send + Sync {
    fn spec(&self) -> EncoderSpec;

    /// Identity string recorded in cache manifests and reports.
    fn id(&self) -> String;

    fn encode(&self, token_ids: &[u32]) -> Result<EncoderOutput>;
}

/// Per-layer embeddings and per-layer, per-head attention for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub sentence_id: String,
    pub length: usize,
    pub spec: EncoderSpec,
    pub embeddings: Vec<f32>,
    pub attentions: Vec<f32>,
}

impl EncodedSentence {
    pub fn new(sentence_id: impl Into<String>, length: usize, spec: EncoderSpec, output: EncoderOutput) -> Result<Self> {
        let s = Self {
            sentence_id: sentence_id.into(),
            length,
            spec,
            embeddings: output.embeddings,
            attentions: output.attentions,
        };
        s.check_shapes()?;
        Ok(s)
    }

    fn check_shapes(&self) -> Result<()> {
        let (l, h) = (self.length, self.spec.hidden_size);
        let want_emb = self.spec.num_states() * l * h;
        let want_att = self.spec.num_layers * self.spec.num_heads * l * l;
        if self.embeddings.len() != want_emb || self.attentions.len() != want_att {
            return Err(Error::Backend(format!(
                "sentence `{}`: tensor sizes {}/{} do not match spec ({want_emb}/{want_att})",
                self.sentence_id,
                self.embeddings.len(),
                self.attentions.len()
            )));
        }
        Ok(())
    }

    /// Embedding of `token` at `layer` (0 = input embedding).
    pub fn embedding(&self, layer: usize, token: usize) -> &[f32] {
        let (l, h) = (self.length, self.spec.hidden_size);
        let start = (layer * l + token) * h;
        &self.embeddings[start..start + h]
    }

    /// Row-major `L×L` attention of `head` (0-based) at `layer` (1-based).
    pub fn attention(&self, layer: usize, head: usize) -> &[f32] {
        assert!(layer >= 1 && layer <= self.spec.num_layers, "attention layer {layer} out of range");
        let l = self.length;
        let start = ((layer - 1) * self.spec.num_heads + head) * l * l;
        &self.attentions[start..start + l * l]
    }

    /// Check finiteness and row-stochasticity of every attention row.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        if let Some(i) = self.embeddings.iter().position(|v| !v.is_finite()) {
            return Err(Error::Backend(format!(
                "sentence `{}`: non-finite embedding value at flat index {i}",
                self.sentence_id
            )));
        }
        let l = self.length;
        for (r, row) in self.attentions.chunks_exact(l).enumerate() {
            let sum: f32 = row.iter().sum();
            let in_range = row.iter().all(|&v| (0.0..=1.0).contains(&v));
            if !in_range || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                let per_layer = self.spec.num_heads * l;
                return Err(Error::Backend(format!(
                    "sentence `{}`: attention row not stochastic (layer {}, head {}, row {}, sum {sum})",
                    self.sentence_id,
                    r / per_layer + 1,
                    (r % per_layer) / l,
                    r % l
                )));
            }
        }
        Ok(())
    }
}

/// One encoded sentence with its label and role alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedEntry {
    pub label: ConstructionLabel,
    pub alignment: RoleAlignment,
    pub encoded: EncodedSentence,
}

/// Encoded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub spec: EncoderSpec,
    pub backend_id: String,
    pub entries: Vec<EncodedEntry>,
}

/// Tokenize, align and encode every record, preserving record order.
pub fn encode_dataset(
    records: &[SentenceRecord],
    backend: &dyn EncoderBackend,
    tokenizer: &WordPieceTokenizer,
) -> Result<EncodedCorpus> {
    let spec = backend.spec();
    let entries = par_map(records, |record| -> Result<EncodedEntry> {
        let tok = tokenizer.tokenize(&record.text)?;
        if tok.len() > spec.max_sequence_length {
            return Err(Error::Alignment(format!(
                "record `{}`: {} tokens exceed the encoder maximum of {}",
                record.id,
                tok.len(),
                spec.max_sequence_length
            )));
        }
        let alignment = map_roles_to_tokens(record, &tok)?;
        let output = backend
            .encode(&tok.ids)
            .map_err(|e| Error::Backend(format!("sentence `{}`: {e}", record.id)))?;
        let encoded = EncodedSentence::new(record.id.clone(), tok.len(), spec, output)?;
        encoded.validate()?;
        Ok(EncodedEntry {
            label: record.label,
            alignment,
            encoded,
        })
    });
    Ok(EncodedCorpus {
        spec,
        backend_id: backend.id(),
        entries: entries.into_iter().collect::<Result<_>>()?,
    })
}

/// What [`gather_role_vectors`] does with sentences lacking the role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingRole {
    #[default]
    Error,
    Skip,
}

/// Role-token embeddings at one layer, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleMatrix {
    pub features: DMatrix<f64>,
    pub labels: Vec<ConstructionLabel>,
    pub sentence_ids: Vec<String>,
    /// Sentences dropped for lacking the role (skip mode only).
    pub skipped: usize,
}

impl RoleMatrix {
    pub fn label_ids(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.index()).collect()
    }
}

pub fn gather_role_vectors(
    corpus: &EncodedCorpus,
    role: SyntacticRole,
    layer: usize,
    missing: MissingRole,
) -> Result<RoleMatrix> {
    if layer > corpus.spec.num_layers {
        return Err(Error::Config(format!(
            "layer {layer} out of range 0..={}",
            corpus.spec.num_layers
        )));
    }
    let h = corpus.spec.hidden_size;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut sentence_ids = Vec::new();
    let mut skipped = 0;
    for entry in &corpus.entries {
        match entry.alignment.token(role) {
            Some(token) => {
                data.extend(entry.encoded.embedding(layer, token).iter().map(|&v| f64::from(v)));
                labels.push(entry.label);
                sentence_ids.push(entry.encoded.sentence_id.clone());
            }
            None if missing == MissingRole::Skip => skipped += 1,
            None => {
                return Err(Error::Alignment(format!(
                    "sentence `{}` has no `{role}` role",
                    entry.encoded.sentence_id
                )))
            }
        }
    }
    Ok(RoleMatrix {
        features: DMatrix::from_row_slice(labels.len(), h, &data),
        labels,
        sentence_ids,
        skipped,
    })
}

/// Row-wise softmax of an `n×n` score matrix, in place.
pub(crate) fn softmax_rows(scores: &mut [f32], n: usize) {
    for row in scores.chunks_exact_mut(n) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
