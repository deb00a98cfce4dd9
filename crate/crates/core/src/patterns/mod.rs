// SPDX-License-Identifier: MIT OR Apache-2.0

//! Part-of-speech query patterns for retrieving construction candidates from
//! tagged corpora.
//!
//! Two notations are supported:
//!
//! - **BNC C5**: `_VV*` matches any tag starting with `VV`, `way` is a
//!   literal word form, `*` is a gap of zero or more words.
//! - **COCA**: bare tag classes (`VERB`, `NOUN`, `ADJ`, `PREP`, `PRON`,
//!   `POSS`) resolved through a [`TagTable`], literals and gaps as above.
//!
//! In both, `( a | b )` is a required group of alternatives and `( ... )?`
//! an optional one. Gaps are bounded by `max_gap` at match time.

mod corpus;
mod matcher;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ConstructionLabel;

pub use corpus::{read_tagged_corpus, scan_corpus, scan_sentence, TaggedSentence};
pub use matcher::{match_pattern, Binding, MatchSpan};
pub use parse::{parse_pattern, parse_pattern_with};

/// Default bound on the number of words a single gap may consume.
pub const DEFAULT_MAX_GAP: usize = 3;

/// Tagset notation of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    BncC5,
    Coca,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BncC5 => "bnc",
            Self::Coca => "coca",
        })
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bnc" | "bnc_c5" | "c5" => Ok(Self::BncC5),
            "coca" => Ok(Self::Coca),
            _ => Err(format!("unknown dialect `{s}` (expected bnc or coca)")),
        }
    }
}

/// Coarse word class of a part-of-speech atom, used to map bound words onto
/// provisional syntactic roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagClass {
    Verb,
    Noun,
    Adjective,
    Preposition,
    Pronoun,
    Possessive,
    Other,
}

/// Resolves a written tag (`AVP`, `VERB`) to the tag prefixes it accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagTable {
    classes: BTreeMap<String, Vec<String>>,
}

impl TagTable {
    /// CLAWS7-style lowercase prefixes for the COCA tag classes.
    pub fn coca() -> Self {
        let classes = [
            ("VERB", &["v"][..]),
            ("NOUN", &["n"]),
            ("ADJ", &["j"]),
            ("PREP", &["i"]),
            ("PRON", &["p"]),
            ("POSS", &["appge"]),
        ];
        Self::from_pairs(&classes)
    }

    /// C5 tags match themselves as prefixes, except `AVP`, which also accepts
    /// prepositions so that path phrases like "into the garage" are found.
    pub fn bnc() -> Self {
        Self::from_pairs(&[("AVP", &["AVP", "PRP"][..])])
    }

    pub fn from_pairs(pairs: &[(&str, &[&str])]) -> Self {
        Self {
            classes: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }

    pub fn for_dialect(dialect: Dialect) -> Self {
        match dialect {
            Dialect::BncC5 => Self::bnc(),
            Dialect::Coca => Self::coca(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.classes.get(name).map(Vec::as_slice)
    }

    pub fn insert(&mut self, name: impl Into<String>, prefixes: Vec<String>) {
        self.classes.insert(name.into(), prefixes);
    }
}

/// One element of a compiled pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternAtom {
    /// Matches a word whose tag starts with one of `prefixes`. `tag` is the
    /// tag as written in the source (`VV`, `NOUN`).
    PosPrefix { tag: String, prefixes: Vec<String> },
    /// Matches a lowercase word form.
    Literal(String),
    /// Consumes `0..=max_gap` words.
    Gap,
    Group {
        alternatives: Vec<Vec<PatternAtom>>,
        optional: bool,
    },
}

impl PatternAtom {
    #[cfg(test)]
    pub(crate) fn pos(tag: &str, prefixes: &[&str]) -> Self {
        Self::PosPrefix {
            tag: tag.to_string(),
            prefixes: prefixes.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Word class of a part-of-speech atom in the given dialect.
    pub fn class(&self, dialect: Dialect) -> TagClass {
        let Self::PosPrefix { tag, .. } = self else {
            return TagClass::Other;
        };
        match dialect {
            Dialect::BncC5 => {
                if tag.starts_with('V') {
                    TagClass::Verb
                } else if tag.starts_with("NN") || tag.starts_with("NP") {
                    TagClass::Noun
                } else if tag.starts_with("AJ") {
                    TagClass::Adjective
                } else if tag == "AVP" || tag.starts_with("PR") {
                    TagClass::Preposition
                } else if tag.starts_with("PN") {
                    TagClass::Pronoun
                } else if tag == "DPS" {
                    TagClass::Possessive
                } else {
                    TagClass::Other
                }
            }
            Dialect::Coca => match tag.as_str() {
                "VERB" => TagClass::Verb,
                "NOUN" => TagClass::Noun,
                "ADJ" => TagClass::Adjective,
                "PREP" => TagClass::Preposition,
                "PRON" => TagClass::Pronoun,
                "POSS" => TagClass::Possessive,
                _ => TagClass::Other,
            },
        }
    }

    /// Whether a leaf atom accepts `(word, tag)`. Groups and gaps never do.
    pub(crate) fn accepts(&self, word: &str, tag: &str) -> bool {
        match self {
            Self::PosPrefix { prefixes, .. } => tag_matches(tag, prefixes),
            Self::Literal(lit) => crate::dataset::normalize_word(word) == *lit,
            Self::Gap | Self::Group { .. } => false,
        }
    }
}

/// Prefix match against each `-`-separated part of a (possibly ambiguous)
/// tag, case-insensitively.
pub(crate) fn tag_matches(tag: &str, prefixes: &[String]) -> bool {
    tag.split('-').any(|part| {
        prefixes.iter().any(|p| {
            part.len() >= p.len() && part[..p.len()].eq_ignore_ascii_case(p)
        })
    })
}

/// A compiled query pattern for one construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub atoms: Vec<PatternAtom>,
    pub dialect: Dialect,
    pub construction: ConstructionLabel,
    pub source: String,
}

impl Pattern {
    /// Whether the first atom is a verb-class atom.
    pub fn starts_with_verb(&self) -> bool {
        self.atoms
            .first()
            .is_some_and(|a| a.class(self.dialect) == TagClass::Verb)
    }

    /// Look up an atom by its path (top-level index, then alternative and
    /// inner index for each nested group).
    pub fn atom_at(&self, path: &[usize]) -> Option<&PatternAtom> {
        let (&first, mut rest) = path.split_first()?;
        let mut atom = self.atoms.get(first)?;
        while !rest.is_empty() {
            let PatternAtom::Group { alternatives, .. } = atom else {
                return None;
            };
            let [alt, inner, tail @ ..] = rest else {
                return None;
            };
            atom = alternatives.get(*alt)?.get(*inner)?;
            rest = tail;
        }
        Some(atom)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}", self.construction, self.dialect, self.source)
    }
}

/// Query sources for the four constructions, per dialect.
pub fn bundled_sources(dialect: Dialect) -> [(ConstructionLabel, &'static str); 4] {
    use ConstructionLabel::*;
    match dialect {
        Dialect::BncC5 => [
            (Resultative, "_VV* (* _NN* | _PN*) (_AJ*)"),
            (CausedMotion, "_VV* * _NN* _AVP * * * _NN*"),
            (Ditransitive, "_VV* (_PN* | _NP0) * _NN*"),
            (Way, "_VV* _DPS way"),
        ],
        Dialect::Coca => [
            (Resultative, "VERB * NOUN ADJ"),
            (CausedMotion, "VERB * NOUN PREP"),
            (Ditransitive, "VERB PRON * NOUN"),
            (Way, "VERB POSS way"),
        ],
    }
}

/// The compiled query set for a dialect.
pub fn bundled_patterns(dialect: Dialect) -> Vec<Pattern> {
    bundled_sources(dialect)
        .into_iter()
        .map(|(label, src)| parse_pattern(src, dialect, label).expect("bundled pattern parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_patterns_start_with_verbs() {
        for dialect in [Dialect::BncC5, Dialect::Coca] {
            for p in bundled_patterns(dialect) {
                assert!(p.starts_with_verb(), "{p}");
            }
        }
    }

    #[test]
    fn portmanteau_tags_match_either_part() {
        let prefixes = vec!["PRP".to_string()];
        assert!(tag_matches("AVP-PRP", &prefixes));
        assert!(!tag_matches("AVP", &prefixes));
    }

    #[test]
    fn atom_paths_reach_into_groups() {
        let p = parse_pattern("_VV* (* _NN* | _PN*)", Dialect::BncC5, ConstructionLabel::Resultative)
            .unwrap();
        assert_eq!(p.atom_at(&[1, 0, 1]), Some(&PatternAtom::pos("NN", &["NN"])));
        assert_eq!(p.atom_at(&[1, 1, 0]), Some(&PatternAtom::pos("PN", &["PN"])));
        assert_eq!(p.atom_at(&[1, 2, 0]), None);
    }
}
