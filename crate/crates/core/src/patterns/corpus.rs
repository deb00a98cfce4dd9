// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::dataset::{ConstructionLabel, Corpus, SentenceRecord, SyntacticRole};
use crate::error::{Error, Result};

use super::{match_pattern, MatchSpan, Pattern, PatternAtom, TagClass};

/// A sentence of a vertical tagged corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub id: String,
    /// `(word, tag)` pairs.
    pub tokens: Vec<(String, String)>,
    /// 1-based line of the first token.
    pub line: usize,
}

/// Read a vertical corpus: one `word<TAB>tag` per line, blank lines between
/// sentences, optional `# id: <id>` before a sentence. Sentences without an
/// id are numbered `s1`, `s2`, ... in file order.
pub fn read_tagged_corpus<R: BufRead>(reader: R) -> impl Iterator<Item = Result<TaggedSentence>> {
    TaggedCorpusReader {
        lines: reader.lines(),
        line_no: 0,
        count: 0,
        done: false,
    }
}

struct TaggedCorpusReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    count: usize,
    done: bool,
}

impl<R: BufRead> Iterator for TaggedCorpusReader<R> {
    type Item = Result<TaggedSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut id: Option<String> = None;
        let mut tokens = Vec::new();
        let mut first_line = 0;
        loop {
            let Some(line) = self.lines.next() else {
                self.done = true;
                break;
            };
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::Corpus {
                        line: self.line_no,
                        message: e.to_string(),
                    }));
                }
            };
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                if tokens.is_empty() {
                    continue;
                }
                break;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if !tokens.is_empty() {
                    self.done = true;
                    return Some(Err(Error::Corpus {
                        line: self.line_no,
                        message: "comment inside a sentence (missing blank line?)".into(),
                    }));
                }
                if let Some(value) = comment.trim().strip_prefix("id:") {
                    id = Some(value.trim().to_string());
                }
                continue;
            }
            let mut parts = trimmed.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(t), None) if !w.trim().is_empty() && !t.trim().is_empty() => {
                    if tokens.is_empty() {
                        first_line = self.line_no;
                    }
                    tokens.push((w.trim().to_string(), t.trim().to_string()));
                }
                _ => {
                    self.done = true;
                    return Some(Err(Error::Corpus {
                        line: self.line_no,
                        message: format!("expected `word<TAB>tag`, found `{trimmed}`"),
                    }));
                }
            }
        }
        if tokens.is_empty() {
            return None;
        }
        self.count += 1;
        Some(Ok(TaggedSentence {
            id: id.unwrap_or_else(|| format!("s{}", self.count)),
            tokens,
            line: first_line,
        }))
    }
}

/// Map a match's bound atoms onto provisional roles.
fn provisional_roles(pattern: &Pattern, span: &MatchSpan) -> BTreeMap<SyntacticRole, usize> {
    let mut roles = BTreeMap::new();
    for b in &span.bindings {
        let Some(atom) = pattern.atom_at(&b.path) else {
            continue;
        };
        let has_verb = roles.contains_key(&SyntacticRole::Verb);
        match (atom, atom.class(pattern.dialect)) {
            (PatternAtom::Literal(w), _) if w == "way" => {
                roles.entry(SyntacticRole::WayNoun).or_insert(b.word);
            }
            (_, TagClass::Verb) if !has_verb => {
                roles.insert(SyntacticRole::Verb, b.word);
            }
            (_, TagClass::Noun) if has_verb => {
                roles.entry(SyntacticRole::Obj).or_insert(b.word);
            }
            (_, TagClass::Preposition)
                if has_verb && pattern.construction == ConstructionLabel::CausedMotion =>
            {
                roles.entry(SyntacticRole::Prep).or_insert(b.word);
            }
            (_, TagClass::Pronoun)
                if has_verb && pattern.construction == ConstructionLabel::Ditransitive =>
            {
                roles.entry(SyntacticRole::Obj2).or_insert(b.word);
            }
            _ => {}
        }
    }
    // in the way construction the object noun is "way" itself
    if let Some(&w) = roles.get(&SyntacticRole::WayNoun) {
        roles.entry(SyntacticRole::Obj).or_insert(w);
    }
    roles
}

/// Candidates for one sentence: one per (pattern, match), in pattern order
/// then start order.
pub fn scan_sentence(
    sentence: &TaggedSentence,
    patterns: &[Pattern],
    max_gap: usize,
    corpus: Corpus,
) -> Vec<SentenceRecord> {
    let text = sentence
        .tokens
        .iter()
        .map(|(w, _)| w.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let mut out = Vec::new();
    for pattern in patterns {
        for span in match_pattern(pattern, &sentence.id, &sentence.tokens, max_gap) {
            out.push(SentenceRecord {
                id: format!("{}:{}:{}", sentence.id, pattern.construction, span.start),
                text: text.clone(),
                label: pattern.construction,
                corpus,
                roles: provisional_roles(pattern, &span),
                provisional: true,
            });
        }
    }
    out
}

/// Scan a tagged corpus with a set of patterns, emitting provisional
/// candidate records in corpus order.
pub fn scan_corpus<'a, R: BufRead + 'a>(
    reader: R,
    patterns: &'a [Pattern],
    max_gap: usize,
    corpus: Corpus,
) -> impl Iterator<Item = Result<SentenceRecord>> + 'a {
    read_tagged_corpus(reader).flat_map(move |sentence| {
        let batch: Vec<Result<SentenceRecord>> = match sentence {
            Ok(s) => scan_sentence(&s, patterns, max_gap, corpus)
                .into_iter()
                .map(Ok)
                .collect(),
            Err(e) => vec![Err(e)],
        };
        batch
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{bundled_patterns, Dialect};

    #[test]
    fn reads_ids_and_autonumbers() {
        let src = "# id: a\nHe\tPNP\nran\tVVD\n\nShe\tPNP\nsat\tVVD\n";
        let s: Vec<_> = read_tagged_corpus(src.as_bytes()).collect::<Result<_>>().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id, "a");
        assert_eq!(s[1].id, "s2");
        assert_eq!(s[1].line, 5);
    }

    #[test]
    fn malformed_line_reports_number() {
        let src = "He\tPNP\nran VVD\n";
        let err = read_tagged_corpus(src.as_bytes()).next().unwrap().unwrap_err();
        assert!(matches!(err, Error::Corpus { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_corpus_scans_to_nothing() {
        let pats = bundled_patterns(Dialect::BncC5);
        assert_eq!(scan_corpus("".as_bytes(), &pats, 3, Corpus::Bnc).count(), 0);
    }

    #[test]
    fn way_candidate_gets_verb_obj_and_way() {
        let pats = bundled_patterns(Dialect::BncC5);
        let src = "He\tPNP\nfought\tVVD\nhis\tDPS\nway\tNN1\n";
        let c: Vec<_> = scan_corpus(src.as_bytes(), &pats[3..], 3, Corpus::Bnc)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].role(SyntacticRole::Verb), Some(1));
        assert_eq!(c[0].role(SyntacticRole::WayNoun), Some(3));
        assert_eq!(c[0].role(SyntacticRole::Obj), Some(3));
        assert!(c[0].provisional);
    }
}
