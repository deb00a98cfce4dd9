// SPDX-License-Identifier: MIT OR Apache-2.0

//! # ascprobe
//!
//! Layer-wise probing of argument structure constructions (resultative,
//! caused-motion, ditransitive, way) in a transformer encoder.
//!
//! The pipeline ingests role-annotated sentences, aligns each annotated word
//! to its first WordPiece token, runs the sentences through a frozen encoder
//! (a pretrained BERT checkpoint, or a deterministic synthetic stand-in), and
//! then measures per layer:
//!
//! - cluster separation of the classifier-token embeddings ([`metrics::gdv`]),
//! - linear decodability of the construction from single-token embeddings
//!   ([`probing`]),
//! - how discriminative each role's incoming attention is across constructions
//!   ([`metrics::fdr_sweep`]),
//! - 2-D projections of the classifier-token embeddings ([`projection`]).
//!
//! A small part-of-speech query language ([`patterns`]) reproduces the corpus
//! retrieval step that produces construction candidates for annotation.
//!
//! ```no_run
//! use ascprobe::report::{run_full_analysis, RunConfig};
//!
//! # fn main() -> ascprobe::Result<()> {
//! let config = RunConfig::default();
//! let report = run_full_analysis(&config)?;
//! for (layer, value) in &report.gdv_by_layer {
//!     println!("layer {layer}: GDV {value:.4}");
//! }
//! # Ok(())
//! # }
//! ```

#![forbid(unsafe_code)]

pub mod alignment;
pub mod dataset;
pub mod error;
pub mod extraction;
pub mod metrics;
pub mod patterns;
pub mod probing;
pub mod projection;
pub mod report;
mod util;

pub use alignment::{map_roles_to_tokens, RoleAlignment, Tokenization, WordPieceTokenizer};
pub use dataset::{
    load_dataset, stratified_sample, validate_balance, write_dataset, BalanceReport,
    ConstructionLabel, Corpus, SentenceRecord, SyntacticRole,
};
pub use error::{Error, Result};
pub use extraction::{
    encode_dataset, gather_role_vectors, read_cache, write_cache, EncodedCorpus, EncodedEntry,
    EncodedSentence, EncoderBackend, EncoderSpec, MissingRole, SyntheticBackend,
};
pub use metrics::{fdr_pair, fdr_sweep, gdv, incoming_attention};
pub use patterns::{match_pattern, parse_pattern, scan_corpus, Dialect, MatchSpan, Pattern};
pub use probing::{probe_sweep, train_probe, ProbeConfig, ProbeReport};
pub use projection::{mds_project, tsne_project, ProjectionResult, TsneConfig};
