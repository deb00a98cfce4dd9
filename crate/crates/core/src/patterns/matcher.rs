// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{Pattern, PatternAtom};

/// One bound (non-gap) atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    /// Path of the atom inside the pattern, see [`Pattern::atom_at`].
    pub path: Vec<usize>,
    pub word: usize,
}

/// A matched span of a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSpan {
    pub sentence_id: String,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    /// Bound atoms in pattern order; word indices strictly increase.
    pub bindings: Vec<Binding>,
}

#[derive(Debug, Clone)]
struct Leaf<'a> {
    path: Vec<usize>,
    atom: &'a PatternAtom,
}

/// Expand groups into the alternative flat sequences, in preference order:
/// alternatives left to right, optional groups present before absent.
fn expand<'a>(atoms: &'a [PatternAtom], prefix: &[usize]) -> Vec<Vec<Leaf<'a>>> {
    let mut seqs: Vec<Vec<Leaf<'a>>> = vec![Vec::new()];
    for (i, atom) in atoms.iter().enumerate() {
        let mut path = prefix.to_vec();
        path.push(i);
        match atom {
            PatternAtom::Group {
                alternatives,
                optional,
            } => {
                let mut options: Vec<Vec<Leaf<'a>>> = Vec::new();
                for (a, alt) in alternatives.iter().enumerate() {
                    let mut alt_prefix = path.clone();
                    alt_prefix.push(a);
                    options.extend(expand(alt, &alt_prefix));
                }
                if *optional {
                    options.push(Vec::new());
                }
                seqs = seqs
                    .into_iter()
                    .flat_map(|s| {
                        options.iter().map(move |o| {
                            let mut s = s.clone();
                            s.extend(o.iter().cloned());
                            s
                        })
                    })
                    .collect();
            }
            _ => {
                for s in &mut seqs {
                    s.push(Leaf {
                        path: path.clone(),
                        atom,
                    });
                }
            }
        }
    }
    seqs
}

/// Enumerate every way `leaves` can bind starting with a word at `pos`.
/// `at_start` means the previous leaf consumed a word (or nothing has been
/// bound yet), so gaps only separate bound atoms.
fn enumerate(
    leaves: &[Leaf<'_>],
    sentence: &[(String, String)],
    pos: usize,
    max_gap: usize,
    bound: &mut Vec<usize>,
    out: &mut Vec<(usize, Vec<usize>)>,
) {
    let Some((leaf, rest)) = leaves.split_first() else {
        if let Some(&last) = bound.last() {
            out.push((last + 1, bound.clone()));
        }
        return;
    };
    match leaf.atom {
        PatternAtom::Gap => {
            // trailing gaps consume nothing: the shortest match is wanted
            if rest.iter().all(|l| matches!(l.atom, PatternAtom::Gap)) {
                enumerate(&[], sentence, pos, max_gap, bound, out);
                return;
            }
            for skip in 0..=max_gap {
                if pos + skip > sentence.len() {
                    break;
                }
                enumerate(rest, sentence, pos + skip, max_gap, bound, out);
            }
        }
        atom => {
            let Some((word, tag)) = sentence.get(pos) else {
                return;
            };
            if atom.accepts(word, tag) {
                bound.push(pos);
                enumerate(rest, sentence, pos + 1, max_gap, bound, out);
                bound.pop();
            }
        }
    }
}

/// Find all matches of `pattern` in a tagged sentence.
///
/// For each start word the shortest match is reported; among equally short
/// matches, the one whose bound words come earliest wins, then the earliest
/// alternative in preference order.
pub fn match_pattern(
    pattern: &Pattern,
    sentence_id: &str,
    sentence: &[(String, String)],
    max_gap: usize,
) -> Vec<MatchSpan> {
    let flats: Vec<Vec<Leaf<'_>>> = expand(&pattern.atoms, &[])
        .into_iter()
        .map(|seq| {
            seq.into_iter()
                .skip_while(|l| matches!(l.atom, PatternAtom::Gap))
                .collect::<Vec<_>>()
        })
        .filter(|seq| !seq.is_empty())
        .collect();

    let mut spans = Vec::new();
    for start in 0..sentence.len() {
        let mut best: Option<(usize, Vec<usize>, usize)> = None;
        for (f, flat) in flats.iter().enumerate() {
            let mut found = Vec::new();
            enumerate(flat, sentence, start, max_gap, &mut Vec::new(), &mut found);
            for (end, words) in found {
                let better = match &best {
                    None => true,
                    Some((b_end, b_words, _)) => (end, &words) < (*b_end, b_words),
                };
                if better {
                    best = Some((end, words, f));
                }
            }
        }
        if let Some((end, words, f)) = best {
            let leaves: Vec<&Leaf<'_>> = flats[f]
                .iter()
                .filter(|l| !matches!(l.atom, PatternAtom::Gap))
                .collect();
            let bindings = leaves
                .iter()
                .zip(&words)
                .map(|(l, &word)| Binding {
                    path: l.path.clone(),
                    word,
                })
                .collect();
            spans.push(MatchSpan {
                sentence_id: sentence_id.to_string(),
                start,
                end,
                bindings,
            });
        }
    }
    spans
}
