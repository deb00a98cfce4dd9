// SPDX-License-Identifier: MIT OR Apache-2.0

//! Word-to-subword alignment.
//!
//! Every annotated role is represented by exactly one token: the first
//! subword of its word. When punctuation is glued to the word (`book.`,
//! `"Hello`), the first subword of the word proper is used, not the split-off
//! punctuation mark.

mod wordpiece;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{SentenceRecord, SyntacticRole};
use crate::error::{Error, Result};

pub use wordpiece::WordPieceTokenizer;

/// A subword sequence with its provenance.
///
/// Two word index spaces are tracked: `word_of_token` counts pre-tokenized
/// words (whitespace words further split at punctuation, so `"book."` is two
/// words), while `source_word_of_token` counts whitespace-delimited words, the
/// space role annotations live in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenization {
    pub tokens: Vec<String>,
    pub ids: Vec<u32>,
    pub word_of_token: Vec<Option<usize>>,
    pub source_word_of_token: Vec<Option<usize>>,
    pub is_continuation: Vec<bool>,
    /// One entry per pre-tokenized word: true for a lone punctuation mark.
    pub punctuation_word: Vec<bool>,
}

impl Tokenization {
    fn push_special(&mut self, token: &str, id: u32) {
        self.tokens.push(token.to_string());
        self.ids.push(id);
        self.word_of_token.push(None);
        self.source_word_of_token.push(None);
        self.is_continuation.push(false);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Verify the structural invariants: specials at both ends, continuation
    /// pieces share their predecessor's word, word indices never decrease.
    pub fn check(&self) -> Result<()> {
        let n = self.tokens.len();
        let fail = |m: String| Err(Error::Alignment(m));
        if n < 2 || self.word_of_token[0].is_some() || self.word_of_token[n - 1].is_some() {
            return fail("first and last tokens must be specials".into());
        }
        let mut prev: Option<usize> = None;
        for i in 1..n - 1 {
            let Some(w) = self.word_of_token[i] else {
                return fail(format!("token {i} has no word"));
            };
            if self.is_continuation[i] && self.word_of_token[i - 1] != Some(w) {
                return fail(format!("continuation token {i} starts a new word"));
            }
            if prev.is_some_and(|p| w < p) {
                return fail(format!("word index decreases at token {i}"));
            }
            prev = Some(w);
        }
        Ok(())
    }
}

/// Role → token index for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAlignment {
    pub sentence_id: String,
    pub role_to_token: BTreeMap<SyntacticRole, usize>,
}

impl RoleAlignment {
    pub fn token(&self, role: SyntacticRole) -> Option<usize> {
        self.role_to_token.get(&role).copied()
    }
}

/// Map each annotated role to the first subword of its word; the classifier
/// role always maps to token 0.
pub fn map_roles_to_tokens(record: &SentenceRecord, tok: &Tokenization) -> Result<RoleAlignment> {
    let mut role_to_token = BTreeMap::new();
    role_to_token.insert(SyntacticRole::Cls, 0);
    for (&role, &word) in &record.roles {
        let starts: Vec<usize> = (0..tok.len())
            .filter(|&i| tok.source_word_of_token[i] == Some(word) && !tok.is_continuation[i])
            .collect();
        let proper = starts.iter().copied().find(|&i| {
            tok.word_of_token[i].is_some_and(|w| !tok.punctuation_word[w])
        });
        let Some(index) = proper.or_else(|| starts.first().copied()) else {
            let shown = record.words().get(word).copied().unwrap_or("?");
            return Err(Error::Alignment(format!(
                "record `{}`: role `{role}` word {word} (`{shown}`) produced no token",
                record.id
            )));
        };
        role_to_token.insert(role, index);
    }
    Ok(RoleAlignment {
        sentence_id: record.id.clone(),
        role_to_token,
    })
}
