// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labeled-sentence data model, the line-delimited dataset format, record
//! validation and stratified sampling.
//!
//! Each line of a dataset file is a JSON object:
//!
//! ```text
//! {"id":"res-01","text":"She painted the wall red.","label":"resultative","corpus":"other","roles":{"subj":0,"verb":1,"obj":3}}
//! ```
//!
//! Role indices point into the whitespace-split words of `text`; punctuation
//! stays attached to its word.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DatasetError, Error, Result};

/// The four argument structure constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionLabel {
    Resultative,
    CausedMotion,
    Ditransitive,
    Way,
}

impl ConstructionLabel {
    pub const ALL: [Self; 4] = [
        Self::Resultative,
        Self::CausedMotion,
        Self::Ditransitive,
        Self::Way,
    ];

    /// Dense class id in `0..4`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Resultative => "resultative",
            Self::CausedMotion => "caused_motion",
            Self::Ditransitive => "ditransitive",
            Self::Way => "way",
        }
    }
}

impl fmt::Display for ConstructionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstructionLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown construction label `{s}`"))
    }
}

/// Syntactic roles. `Cls` is the virtual classifier-token role and never
/// appears in a record's annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntacticRole {
    Cls,
    Subj,
    Verb,
    Obj,
    Obj2,
    Prep,
    #[serde(rename = "way")]
    WayNoun,
    Det,
}

impl SyntacticRole {
    pub const ALL: [Self; 8] = [
        Self::Cls,
        Self::Subj,
        Self::Verb,
        Self::Obj,
        Self::Obj2,
        Self::Prep,
        Self::WayNoun,
        Self::Det,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cls => "cls",
            Self::Subj => "subj",
            Self::Verb => "verb",
            Self::Obj => "obj",
            Self::Obj2 => "obj2",
            Self::Prep => "prep",
            Self::WayNoun => "way",
            Self::Det => "det",
        }
    }
}

impl fmt::Display for SyntacticRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntacticRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == lower)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

/// Source corpus of a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corpus {
    #[serde(alias = "BNC")]
    Bnc,
    #[serde(alias = "COCA")]
    Coca,
    #[serde(alias = "OTHER")]
    Other,
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bnc => "bnc",
            Self::Coca => "coca",
            Self::Other => "other",
        })
    }
}

impl FromStr for Corpus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bnc" => Ok(Self::Bnc),
            "coca" => Ok(Self::Coca),
            "other" => Ok(Self::Other),
            _ => Err(format!("unknown corpus `{s}`")),
        }
    }
}

/// One labeled, role-annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    pub label: ConstructionLabel,
    pub corpus: Corpus,
    /// Role → 0-based index into `text.split_whitespace()`.
    pub roles: BTreeMap<SyntacticRole, usize>,
    /// Set on unreviewed candidates produced by corpus scanning.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub provisional: bool,
}

impl SentenceRecord {
    pub fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }

    pub fn role(&self, role: SyntacticRole) -> Option<usize> {
        self.roles.get(&role).copied()
    }

    /// Check every record invariant.
    pub fn validate(&self) -> std::result::Result<(), DatasetError> {
        let invalid = |message: String| DatasetError::Invalid {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        let words = self.words();
        if words.is_empty() {
            return Err(invalid("empty text".into()));
        }
        for (&role, &word) in &self.roles {
            if role == SyntacticRole::Cls {
                return Err(invalid("`cls` is virtual and cannot be annotated".into()));
            }
            if word >= words.len() {
                return Err(invalid(format!(
                    "role `{role}` index {word} out of bounds ({} words)",
                    words.len()
                )));
            }
        }
        for required in [SyntacticRole::Verb, SyntacticRole::Obj] {
            if !self.roles.contains_key(&required) {
                return Err(invalid(format!("missing required role `{required}`")));
            }
        }
        let restricted = [
            (SyntacticRole::Obj2, ConstructionLabel::Ditransitive),
            (SyntacticRole::Prep, ConstructionLabel::CausedMotion),
            (SyntacticRole::WayNoun, ConstructionLabel::Way),
        ];
        for (role, only) in restricted {
            if self.roles.contains_key(&role) && self.label != only {
                return Err(invalid(format!(
                    "role `{role}` is only allowed on {only} sentences, found on {}",
                    self.label
                )));
            }
        }
        if let Some(w) = self.role(SyntacticRole::WayNoun) {
            let form = normalize_word(words[w]);
            if form != "way" {
                return Err(invalid(format!(
                    "`way` role points at `{}`, not \"way\"",
                    words[w]
                )));
            }
        }
        Ok(())
    }
}

/// Lowercase and strip leading/trailing punctuation.
pub(crate) fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Parse one dataset line. `line_no` is 1-based and used in errors.
pub fn parse_record(line: &str, line_no: usize) -> std::result::Result<SentenceRecord, DatasetError> {
    let record: SentenceRecord =
        serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
    record.validate()?;
    Ok(record)
}

/// Load and validate every record of a line-delimited dataset file, in file
/// order. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<SentenceRecord>> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    read_dataset(BufReader::new(file)).map_err(|e| match e {
        Error::Dataset(DatasetError::Io { source, .. }) => Error::Dataset(io_err(source)),
        other => other,
    })
}

/// Like [`load_dataset`], from any buffered reader.
pub fn read_dataset(reader: impl BufRead) -> Result<Vec<SentenceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line, i + 1)?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: record.id,
                line: i + 1,
            }
            .into());
        }
        records.push(record);
    }
    Ok(records)
}

/// Serialize records in the dataset line format.
pub fn dataset_to_string(records: &[SentenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        // SentenceRecord serialization cannot fail: all keys are strings
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

const BUNDLED_SAMPLE: &str = include_str!("../data/sample.jsonl");

/// The 40-sentence sample shipped with the crate, ten per construction.
pub fn bundled_sample() -> Vec<SentenceRecord> {
    read_dataset(BUNDLED_SAMPLE.as_bytes()).expect("bundled sample is valid")
}

/// Write records atomically in the dataset line format.
pub fn write_dataset(path: impl AsRef<Path>, records: &[SentenceRecord]) -> Result<()> {
    crate::util::write_atomic(path.as_ref(), dataset_to_string(records).as_bytes())
}

/// Label and corpus counts of a record set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceReport {
    pub counts: BTreeMap<ConstructionLabel, usize>,
    pub per_corpus_counts: BTreeMap<(ConstructionLabel, Corpus), usize>,
    pub balanced: bool,
}

/// Count records per label and per (label, corpus). Never fails.
pub fn validate_balance(records: &[SentenceRecord]) -> BalanceReport {
    let mut counts: BTreeMap<_, _> = ConstructionLabel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut per_corpus_counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.label).or_insert(0) += 1;
        *per_corpus_counts.entry((r.label, r.corpus)).or_insert(0) += 1;
    }
    let mut balanced = counts.values().collect::<BTreeSet<_>>().len() == 1;
    let corpora: BTreeSet<Corpus> = records.iter().map(|r| r.corpus).collect();
    if balanced && corpora.contains(&Corpus::Bnc) && corpora.contains(&Corpus::Coca) {
        balanced = ConstructionLabel::ALL.iter().all(|&l| {
            per_corpus_counts.get(&(l, Corpus::Bnc)) == per_corpus_counts.get(&(l, Corpus::Coca))
        });
    }
    BalanceReport {
        counts,
        per_corpus_counts,
        balanced,
    }
}

/// How [`stratified_sample_with`] partitions records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strata {
    /// One stratum per construction label.
    #[default]
    Label,
    /// One stratum per (label, corpus) pair over the corpora present.
    LabelAndCorpus,
}

/// Draw `n_per_label` records per label uniformly without replacement.
/// Output keeps the input order of the selected records.
pub fn stratified_sample(
    records: &[SentenceRecord],
    n_per_label: usize,
    seed: u64,
) -> Result<Vec<SentenceRecord>> {
    stratified_sample_with(records, n_per_label, seed, Strata::Label)
}

/// Stratified sampling with an explicit stratification; `n` is drawn from
/// every stratum.
pub fn stratified_sample_with(
    records: &[SentenceRecord],
    n: usize,
    seed: u64,
    strata: Strata,
) -> Result<Vec<SentenceRecord>> {
    let corpora: Vec<Option<Corpus>> = match strata {
        Strata::Label => vec![None],
        Strata::LabelAndCorpus => records
            .iter()
            .map(|r| r.corpus)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(Some)
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for label in ConstructionLabel::ALL {
        for &corpus in &corpora {
            let members: Vec<usize> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.label == label && corpus.is_none_or(|c| r.corpus == c))
                .map(|(i, _)| i)
                .collect();
            if members.len() < n {
                let stratum = match corpus {
                    Some(c) => format!("{label}/{c}"),
                    None => label.to_string(),
                };
                return Err(DatasetError::InsufficientStratum {
                    stratum,
                    available: members.len(),
                    requested: n,
                }
                .into());
            }
            chosen.extend(index::sample(&mut rng, members.len(), n).into_iter().map(|k| members[k]));
        }
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| records[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: ConstructionLabel, roles: &[(SyntacticRole, usize)]) -> SentenceRecord {
        SentenceRecord {
            id: "t".into(),
            text: "He fought his way to the top.".into(),
            label,
            corpus: Corpus::Other,
            roles: roles.iter().copied().collect(),
            provisional: false,
        }
    }

    #[test]
    fn obj2_on_way_sentence_is_rejected() {
        use SyntacticRole::*;
        let r = record(ConstructionLabel::Way, &[(Verb, 1), (Obj, 3), (Obj2, 2)]);
        assert!(matches!(r.validate(), Err(DatasetError::Invalid { .. })));
    }

    #[test]
    fn way_role_must_point_at_way() {
        use SyntacticRole::*;
        let ok = record(ConstructionLabel::Way, &[(Verb, 1), (Obj, 3), (WayNoun, 3)]);
        assert!(ok.validate().is_ok());
        let bad = record(ConstructionLabel::Way, &[(Verb, 1), (Obj, 3), (WayNoun, 2)]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn out_of_bounds_role_names_record() {
        use SyntacticRole::*;
        let r = record(ConstructionLabel::Way, &[(Verb, 1), (Obj, 7)]);
        let err = r.validate().unwrap_err().to_string();
        assert!(err.contains("`t`"), "{err}");
    }

    #[test]
    fn unknown_label_is_malformed() {
        let line = r#"{"id":"a","text":"go","label":"passive","corpus":"bnc","roles":{"verb":0,"obj":0}}"#;
        let err = parse_record(line, 3).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 3, .. }));
    }

    #[test]
    fn missing_field_is_named() {
        let line = r#"{"id":"a","text":"go","corpus":"bnc","roles":{"verb":0,"obj":0}}"#;
        let err = parse_record(line, 1).unwrap_err().to_string();
        assert!(err.contains("label"), "{err}");
    }

    #[test]
    fn one_record_is_unbalanced() {
        use SyntacticRole::*;
        let r = record(ConstructionLabel::Way, &[(Verb, 1), (Obj, 3)]);
        assert!(!validate_balance(&[r]).balanced);
    }
}
