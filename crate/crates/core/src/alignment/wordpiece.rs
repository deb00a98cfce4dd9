// SPDX-License-Identifier: MIT OR Apache-2.0

//! Uncased WordPiece tokenizer: text cleanup, lowercasing with accent
//! stripping, punctuation splitting and greedy longest-prefix subword
//! segmentation with `##` continuation pieces.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

use super::Tokenization;

const BUNDLED_VOCAB: &str = include_str!("../../data/vocab.txt");

/// Tokenizer backed by a `vocab.txt` (one token per line, id = line number).
#[derive(Debug, Clone)]
pub struct WordPieceTokenizer {
    vocab: HashMap<String, u32>,
    tokens: Vec<String>,
    cls_id: u32,
    sep_id: u32,
    unk_id: u32,
    lowercase: bool,
    max_chars_per_word: usize,
}

impl WordPieceTokenizer {
    pub const CLS: &'static str = "[CLS]";
    pub const SEP: &'static str = "[SEP]";
    pub const UNK: &'static str = "[UNK]";
    pub const CONTINUATION: &'static str = "##";

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut vocab = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            vocab.entry(t.clone()).or_insert(i as u32);
        }
        let special = |name: &str| {
            vocab
                .get(name)
                .copied()
                .ok_or_else(|| Error::Alignment(format!("vocabulary lacks {name}")))
        };
        Ok(Self {
            cls_id: special(Self::CLS)?,
            sep_id: special(Self::SEP)?,
            unk_id: special(Self::UNK)?,
            vocab,
            tokens,
            lowercase: true,
            max_chars_per_word: 100,
        })
    }

    pub fn from_vocab_str(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(|l| l.trim_end_matches('\r')))
    }

    pub fn from_vocab_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab_str(&text)
    }

    /// Small vocabulary shipped with the crate, covering the bundled sample
    /// plus single-character fallbacks. Used with the synthetic backend.
    pub fn bundled() -> Self {
        Self::from_vocab_str(BUNDLED_VOCAB).expect("bundled vocabulary is valid")
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Split one whitespace-delimited word into cleaned, normalized
    /// pre-tokens (punctuation and CJK ideographs become their own pieces).
    pub fn pre_tokenize(&self, word: &str) -> Vec<String> {
        let mut pieces = Vec::new();
        let mut current = String::new();
        let flush = |current: &mut String, pieces: &mut Vec<String>| {
            if !current.is_empty() {
                pieces.push(std::mem::take(current));
            }
        };
        for c in word.chars() {
            if c == '\0' || c == '\u{fffd}' || is_control(c) {
                continue;
            }
            if c.is_whitespace() {
                flush(&mut current, &mut pieces);
                continue;
            }
            if is_punctuation(c) || is_cjk(c) {
                flush(&mut current, &mut pieces);
                pieces.push(c.to_string());
                continue;
            }
            current.push(c);
        }
        flush(&mut current, &mut pieces);
        if self.lowercase {
            pieces = pieces.into_iter().map(|p| normalize_case(&p)).collect();
        }
        // accent stripping can expose punctuation or empty pieces only in
        // pathological input; drop empties
        pieces.retain(|p| !p.is_empty());
        pieces
    }

    /// Greedy longest-prefix segmentation of one pre-token.
    pub fn wordpiece(&self, piece: &str) -> Vec<(String, u32)> {
        let chars: Vec<char> = piece.chars().collect();
        if chars.len() > self.max_chars_per_word {
            return vec![(Self::UNK.to_string(), self.unk_id)];
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut sub: String = chars[start..end].iter().collect();
                if start > 0 {
                    sub.insert_str(0, Self::CONTINUATION);
                }
                if let Some(&id) = self.vocab.get(&sub) {
                    found = Some((sub, id));
                    break;
                }
                end -= 1;
            }
            match found {
                Some(hit) => {
                    out.push(hit);
                    start = end;
                }
                None => return vec![(Self::UNK.to_string(), self.unk_id)],
            }
        }
        out
    }

    /// Tokenize a sentence, framing it with classifier and separator tokens
    /// and recording the word each subword came from.
    pub fn tokenize(&self, text: &str) -> Result<Tokenization> {
        if text.trim().is_empty() {
            return Err(Error::Alignment("cannot tokenize empty text".into()));
        }
        let mut t = Tokenization::default();
        t.push_special(Self::CLS, self.cls_id);
        let mut pre_word = 0;
        for (source_word, word) in text.split_whitespace().enumerate() {
            for piece in self.pre_tokenize(word) {
                let punct = piece.chars().count() == 1 && piece.chars().all(is_punctuation);
                for (k, (tok, id)) in self.wordpiece(&piece).into_iter().enumerate() {
                    t.tokens.push(tok);
                    t.ids.push(id);
                    t.word_of_token.push(Some(pre_word));
                    t.source_word_of_token.push(Some(source_word));
                    t.is_continuation.push(k > 0);
                }
                t.punctuation_word.push(punct);
                pre_word += 1;
            }
        }
        t.push_special(Self::SEP, self.sep_id);
        Ok(t)
    }
}

fn normalize_case(s: &str) -> String {
    s.to_lowercase()
        .nfd()
        .filter(|c| c.general_category() != GeneralCategory::NonspacingMark)
        .collect()
}

fn is_control(c: char) -> bool {
    if matches!(c, '\t' | '\n' | '\r') {
        return false;
    }
    matches!(
        c.general_category(),
        GeneralCategory::Control | GeneralCategory::Format
    )
}

/// ASCII symbol ranges count as punctuation, as in the original BERT
/// tokenizer, plus every Unicode punctuation category.
pub(crate) fn is_punctuation(c: char) -> bool {
    let cp = c as u32;
    (33..=47).contains(&cp)
        || (58..=64).contains(&cp)
        || (91..=96).contains(&cp)
        || (123..=126).contains(&cp)
        || c.general_category_group() == GeneralCategoryGroup::Punctuation
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}
