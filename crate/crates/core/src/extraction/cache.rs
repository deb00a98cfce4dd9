// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk extraction cache.
//!
//! A cache is a directory with a `manifest.json` and two binary files per
//! sentence. Every binary file starts with a four-byte magic and a
//! little-endian header, stores `f32` values little-endian, and ends with an
//! xxHash64 (seed 0) of all preceding bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::alignment::RoleAlignment;
use crate::dataset::{ConstructionLabel, SyntacticRole};
use crate::error::{CacheError, Error, Result};
use crate::util::write_atomic;

use super::{EncodedCorpus, EncodedEntry, EncodedSentence, EncoderSpec};

pub const CACHE_FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const EMBEDDING_MAGIC: &[u8; 4] = b"ASCE";
const ATTENTION_MAGIC: &[u8; 4] = b"ASCA";
const HEADER_LEN: usize = 20;
const CHECKSUM_LEN: usize = 8;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    encoder: EncoderSpec,
    backend_id: String,
    sentences: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    sentence_id: String,
    label: ConstructionLabel,
    #[serde(rename = "L")]
    length: usize,
    embedding_file: String,
    attention_file: String,
    role_to_token: BTreeMap<SyntacticRole, usize>,
}

fn encode_file(magic: &[u8; 4], dims: [u32; 3], values: &[f32]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + values.len() * 4 + CHECKSUM_LEN);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    for d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let sum = XxHash64::oneshot(0, &buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    buf
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parse and verify one binary tensor file, returning its three header
/// dimensions and payload.
fn decode_file(name: &str, magic: &[u8; 4], bytes: &[u8]) -> std::result::Result<([usize; 3], Vec<f32>), CacheError> {
    let file = name.to_string();
    if bytes.len() < 4 {
        return Err(CacheError::Truncated {
            file,
            len: bytes.len(),
            needed: HEADER_LEN,
        });
    }
    if &bytes[..4] != magic {
        return Err(CacheError::BadMagic { file });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CacheError::Truncated {
            file,
            len: bytes.len(),
            needed: HEADER_LEN,
        });
    }
    let version = read_u32(bytes, 4);
    if version != CACHE_FORMAT_VERSION {
        return Err(CacheError::VersionMismatch {
            file,
            found: version,
            expected: CACHE_FORMAT_VERSION,
        });
    }
    let dims = [
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16) as usize,
    ];
    // attention files hold an L×L matrix per (layer, head), so the last
    // dimension counts twice
    let square = if magic == ATTENTION_MAGIC { dims[2] } else { 1 };
    let count = dims.iter().chain([&square]).try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let expected = count
        .and_then(|c| c.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN + CHECKSUM_LEN));
    if expected != Some(bytes.len()) {
        return Err(CacheError::Checksum { file });
    }
    let body_end = bytes.len() - CHECKSUM_LEN;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8-byte slice"));
    if XxHash64::oneshot(0, &bytes[..body_end]) != stored {
        return Err(CacheError::Checksum { file });
    }
    let values = bytes[HEADER_LEN..body_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, values))
}

/// Write `corpus` into `dir` (created if needed). The manifest is written
/// last, so a directory without one is never mistaken for a complete cache.
pub fn write_cache(corpus: &EncodedCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec = corpus.spec;
    let mut sentences = Vec::with_capacity(corpus.entries.len());
    for (n, entry) in corpus.entries.iter().enumerate() {
        let s = &entry.encoded;
        let length = s.length as u32;
        let embedding_file = format!("{n:06}.emb");
        let attention_file = format!("{n:06}.att");
        let emb = encode_file(
            EMBEDDING_MAGIC,
            [spec.num_states() as u32, length, spec.hidden_size as u32],
            &s.embeddings,
        );
        let att = encode_file(
            ATTENTION_MAGIC,
            [spec.num_layers as u32, spec.num_heads as u32, length],
            &s.attentions,
        );
        write_atomic(&dir.join(&embedding_file), &emb)?;
        write_atomic(&dir.join(&attention_file), &att)?;
        sentences.push(ManifestEntry {
            sentence_id: s.sentence_id.clone(),
            label: entry.label,
            length: s.length,
            embedding_file,
            attention_file,
            role_to_token: entry.alignment.role_to_token.clone(),
        });
    }
    let manifest = Manifest {
        format_version: CACHE_FORMAT_VERSION,
        encoder: spec,
        backend_id: corpus.backend_id.clone(),
        sentences,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(MANIFEST), &json)
}

/// Load and verify a cache written by [`write_cache`].
pub fn read_cache(dir: impl AsRef<Path>) -> Result<EncodedCorpus> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = fs::read(&path).map_err(|e| CacheError::Io {
        path: path.clone(),
        source: e,
    })?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| CacheError::Manifest(e.to_string()))?;
    if manifest.format_version != CACHE_FORMAT_VERSION {
        return Err(CacheError::VersionMismatch {
            file: MANIFEST.into(),
            found: manifest.format_version,
            expected: CACHE_FORMAT_VERSION,
        }
        .into());
    }
    let spec = manifest.encoder;
    let mut entries = Vec::with_capacity(manifest.sentences.len());
    for m in manifest.sentences {
        let load = |name: &str, magic: &[u8; 4]| -> Result<([usize; 3], Vec<f32>)> {
            let p = dir.join(name);
            let bytes = fs::read(&p).map_err(|e| CacheError::Io { path: p, source: e })?;
            Ok(decode_file(name, magic, &bytes)?)
        };
        let (edims, embeddings) = load(&m.embedding_file, EMBEDDING_MAGIC)?;
        let (adims, attentions) = load(&m.attention_file, ATTENTION_MAGIC)?;
        if edims != [spec.num_states(), m.length, spec.hidden_size]
            || adims != [spec.num_layers, spec.num_heads, m.length]
        {
            return Err(CacheError::Manifest(format!(
                "sentence `{}`: file dimensions disagree with the manifest",
                m.sentence_id
            ))
            .into());
        }
        entries.push(EncodedEntry {
            label: m.label,
            alignment: RoleAlignment {
                sentence_id: m.sentence_id.clone(),
                role_to_token: m.role_to_token,
            },
            encoded: EncodedSentence {
                sentence_id: m.sentence_id,
                length: m.length,
                spec,
                embeddings,
                attentions,
            },
        });
    }
    Ok(EncodedCorpus {
        spec,
        backend_id: manifest.backend_id,
        entries,
    })
}
