// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use std::fs;

use ascprobe::dataset::bundled_sample;
use ascprobe::error::CacheError;
use ascprobe::extraction::{BertBackend, ROW_SUM_TOLERANCE};
use ascprobe::{
    encode_dataset, gather_role_vectors, read_cache, write_cache, EncodedCorpus, EncoderBackend, EncoderSpec,
    Error, MissingRole, SentenceRecord, SyntacticRole, SyntheticBackend, WordPieceTokenizer,
};
use proptest::prelude::*;
use serde::Deserialize;

use common::fixture;

#[derive(Deserialize)]
struct Expected {
    text: String,
    ids: Vec<u32>,
    hidden_states: Vec<Vec<Vec<f32>>>,
    attentions: Vec<Vec<Vec<Vec<f32>>>>,
}

fn expected() -> Vec<Expected> {
    serde_json::from_str(&fs::read_to_string(fixture("tiny-bert/expected.json")).unwrap()).unwrap()
}

#[test]
fn reference_backend_reproduces_reference_forward_pass() {
    let backend = BertBackend::load(fixture("tiny-bert")).unwrap();
    let spec = backend.spec();
    assert_eq!((spec.hidden_size, spec.num_layers, spec.num_heads), (32, 2, 4));
    assert!(backend.id().starts_with("reference:bert:l2:h32:sha256="));
    let tokenizer = backend.tokenizer().unwrap();
    let mut worst = 0f32;
    for case in expected() {
        assert_eq!(tokenizer.tokenize(&case.text).unwrap().ids, case.ids, "{}", case.text);
        let out = backend.encode(&case.ids).unwrap();
        let l = case.ids.len();
        for (state, rows) in case.hidden_states.iter().enumerate() {
            for (t, row) in rows.iter().enumerate() {
                for (d, &want) in row.iter().enumerate() {
                    let got = out.embeddings[(state * l + t) * 32 + d];
                    worst = worst.max((got - want).abs());
                }
            }
        }
        for (layer, heads) in case.attentions.iter().enumerate() {
            for (h, rows) in heads.iter().enumerate() {
                for (i, row) in rows.iter().enumerate() {
                    for (j, &want) in row.iter().enumerate() {
                        let got = out.attentions[((layer * 4 + h) * l + i) * l + j];
                        worst = worst.max((got - want).abs());
                    }
                }
            }
        }
    }
    assert!(worst <= 1e-4, "max deviation {worst}");
}

#[test]
fn reference_backend_load_failures() {
    let dir = tempfile::tempdir().unwrap();
    let err = BertBackend::load(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");

    fs::copy(fixture("tiny-bert/config.json"), dir.path().join("config.json")).unwrap();
    fs::write(dir.path().join("model.safetensors"), b"not a tensor file").unwrap();
    let err = BertBackend::load(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn synthetic_base_shapes_and_row_sums() {
    let backend = SyntheticBackend::new(3);
    assert_eq!(backend.spec(), EncoderSpec::BASE);
    let records: Vec<SentenceRecord> = bundled_sample().into_iter().take(3).collect();
    let corpus = encode_dataset(&records, &backend, &WordPieceTokenizer::bundled()).unwrap();
    for e in &corpus.entries {
        let l = e.encoded.length;
        assert_eq!(e.encoded.embeddings.len(), 13 * l * 768);
        assert_eq!(e.encoded.attentions.len(), 12 * 12 * l * l);
        for layer in 1..=12 {
            for head in 0..12 {
                for row in e.encoded.attention(layer, head).chunks(l) {
                    let s: f32 = row.iter().sum();
                    assert!((s - 1.0).abs() <= ROW_SUM_TOLERANCE);
                }
            }
        }
    }
}

#[test]
fn synthetic_backend_is_deterministic_and_seed_dependent() {
    let ids = [2u32, 246, 170, 185, 37, 130, 18, 3];
    let a = SyntheticBackend::new(1).encode(&ids).unwrap();
    let b = SyntheticBackend::new(1).encode(&ids).unwrap();
    let c = SyntheticBackend::new(2).encode(&ids).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.embeddings, c.embeddings);
}

#[test]
fn gather_role_vectors_reports_or_skips_missing_roles() {
    let spec = EncoderSpec { hidden_size: 8, num_layers: 2, num_heads: 2, max_sequence_length: 64 };
    let records = bundled_sample();
    let corpus = encode_dataset(&records, &SyntheticBackend::with_spec(spec, 0), &WordPieceTokenizer::bundled()).unwrap();
    let m = gather_role_vectors(&corpus, SyntacticRole::Cls, 2, MissingRole::Error).unwrap();
    assert_eq!(m.features.shape(), (40, 8));
    assert!(gather_role_vectors(&corpus, SyntacticRole::Obj2, 1, MissingRole::Error).is_err());
    let skip = gather_role_vectors(&corpus, SyntacticRole::Obj2, 1, MissingRole::Skip).unwrap();
    assert_eq!(skip.features.nrows() + skip.skipped, 40);
    assert!(gather_role_vectors(&corpus, SyntacticRole::Cls, 3, MissingRole::Error).is_err());
}

fn small_corpus(seed: u64, n: usize) -> EncodedCorpus {
    let spec = EncoderSpec { hidden_size: 6, num_layers: 2, num_heads: 3, max_sequence_length: 64 };
    let records: Vec<_> = bundled_sample().into_iter().skip(seed as usize % 30).take(n).collect();
    encode_dataset(&records, &SyntheticBackend::with_spec(spec, seed), &WordPieceTokenizer::bundled()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cache_round_trip_is_bit_exact(seed in 0u64..1000, n in 1usize..8) {
        let corpus = small_corpus(seed, n);
        let dir = tempfile::tempdir().unwrap();
        write_cache(&corpus, dir.path()).unwrap();
        let back = read_cache(dir.path()).unwrap();
        prop_assert_eq!(back.entries.len(), corpus.entries.len());
        for (a, b) in corpus.entries.iter().zip(&back.entries) {
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.encoded.embeddings), bits(&b.encoded.embeddings));
            prop_assert_eq!(bits(&a.encoded.attentions), bits(&b.encoded.attentions));
        }
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn any_flipped_payload_byte_is_detected(offset in 20usize..200, bit in 0u8..8) {
        let corpus = small_corpus(1, 1);
        let dir = tempfile::tempdir().unwrap();
        write_cache(&corpus, dir.path()).unwrap();
        let path = dir.path().join("000000.emb");
        let mut bytes = fs::read(&path).unwrap();
        let i = offset % bytes.len();
        bytes[i] ^= 1 << bit;
        fs::write(&path, bytes).unwrap();
        let err = read_cache(dir.path()).unwrap_err();
        prop_assert!(matches!(err, Error::Cache(CacheError::Checksum { .. })), "{}", err);
    }
}

fn corrupt(edit: impl FnOnce(&mut Vec<u8>)) -> Error {
    let corpus = small_corpus(5, 2);
    let dir = tempfile::tempdir().unwrap();
    write_cache(&corpus, dir.path()).unwrap();
    let path = dir.path().join("000001.att");
    let mut bytes = fs::read(&path).unwrap();
    edit(&mut bytes);
    fs::write(&path, bytes).unwrap();
    read_cache(dir.path()).unwrap_err()
}

#[test]
fn truncated_file_is_a_checksum_error() {
    let err = corrupt(|b| b.truncate(b.len() - 5));
    assert!(matches!(err, Error::Cache(CacheError::Checksum { .. })), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn header_truncation_magic_and_version_are_distinct_errors() {
    let err = corrupt(|b| b.truncate(10));
    assert!(matches!(err, Error::Cache(CacheError::Truncated { .. })), "{err}");
    let err = corrupt(|b| b[0] = b'X');
    assert!(matches!(err, Error::Cache(CacheError::BadMagic { .. })), "{err}");
    let err = corrupt(|b| b[4] = 9);
    assert!(matches!(err, Error::Cache(CacheError::VersionMismatch { found: 9, .. })), "{err}");
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_cache(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}
