// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::dataset::ConstructionLabel;
use crate::error::PatternError;

use super::{Dialect, Pattern, PatternAtom, TagTable};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Bar,
    Question,
    Word(String),
}

fn lex(source: &str) -> Vec<(usize, Tok)> {
    let mut out = Vec::new();
    let mut chars = source.char_indices().peekable();
    let col = |byte: usize| source[..byte].chars().count() + 1;
    while let Some((i, c)) = chars.next() {
        let tok = match c {
            c if c.is_whitespace() => continue,
            '(' => Tok::Open,
            ')' => Tok::Close,
            '|' => Tok::Bar,
            '?' => Tok::Question,
            _ => {
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_whitespace() || "()|?".contains(d) {
                        break;
                    }
                    end = j + d.len_utf8();
                    chars.next();
                }
                Tok::Word(source[i..end].to_string())
            }
        };
        out.push((col(i), tok));
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    dialect: Dialect,
    table: &'a TagTable,
    end_column: usize,
}

impl Parser<'_> {
    fn err(column: usize, message: impl Into<String>) -> PatternError {
        PatternError {
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&(usize, Tok)> {
        self.toks.get(self.pos)
    }

    /// Parse atoms until `)`, `|` or end of input.
    fn sequence(&mut self) -> Result<Vec<PatternAtom>, PatternError> {
        let mut atoms = Vec::new();
        while let Some((col, tok)) = self.peek().cloned() {
            match tok {
                Tok::Close | Tok::Bar => break,
                Tok::Question => return Err(Self::err(col, "`?` must follow a group")),
                Tok::Open => {
                    self.pos += 1;
                    atoms.push(self.group(col)?);
                }
                Tok::Word(w) => {
                    self.pos += 1;
                    atoms.push(self.atom(col, &w)?);
                }
            }
        }
        Ok(atoms)
    }

    fn group(&mut self, open_col: usize) -> Result<PatternAtom, PatternError> {
        let mut alternatives = Vec::new();
        loop {
            let start_col = self.peek().map_or(self.end_column, |t| t.0);
            let alt = self.sequence()?;
            if self.peek().is_none() {
                return Err(Self::err(open_col, "unclosed `(`"));
            }
            if alt.is_empty() {
                return Err(Self::err(start_col, "empty alternative in group"));
            }
            alternatives.push(alt);
            match self.peek() {
                Some((_, Tok::Bar)) => self.pos += 1,
                Some((_, Tok::Close)) => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(Self::err(open_col, "unclosed `(`")),
            }
        }
        let optional = matches!(self.peek(), Some((_, Tok::Question)));
        if optional {
            self.pos += 1;
        }
        Ok(PatternAtom::Group {
            alternatives,
            optional,
        })
    }

    fn atom(&self, col: usize, word: &str) -> Result<PatternAtom, PatternError> {
        if word == "*" {
            return Ok(PatternAtom::Gap);
        }
        if is_literal(word) {
            return Ok(PatternAtom::Literal(word.to_string()));
        }
        match self.dialect {
            Dialect::BncC5 => {
                let Some(rest) = word.strip_prefix('_') else {
                    return Err(Self::err(col, format!("`{word}` is neither `_TAG` nor a lowercase word")));
                };
                let tag = rest.strip_suffix('*').unwrap_or(rest);
                if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit()) {
                    return Err(Self::err(col, format!("bad C5 tag `{word}`")));
                }
                let prefixes = self
                    .table
                    .get(tag)
                    .map(<[String]>::to_vec)
                    .unwrap_or_else(|| vec![tag.to_string()]);
                Ok(PatternAtom::PosPrefix {
                    tag: tag.to_string(),
                    prefixes,
                })
            }
            Dialect::Coca => match self.table.get(word) {
                Some(prefixes) => Ok(PatternAtom::PosPrefix {
                    tag: word.to_string(),
                    prefixes: prefixes.to_vec(),
                }),
                None => Err(Self::err(col, format!("unknown COCA tag class `{word}`"))),
            },
        }
    }
}

fn is_literal(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_lowercase())
        && word
            .chars()
            .all(|c| c.is_lowercase() || c == '\'' || c == '-')
}

/// Compile a query pattern with the dialect's default tag table.
pub fn parse_pattern(
    source: &str,
    dialect: Dialect,
    construction: ConstructionLabel,
) -> Result<Pattern, PatternError> {
    parse_pattern_with(source, dialect, construction, &TagTable::for_dialect(dialect))
}

/// Compile a query pattern with an explicit tag table.
pub fn parse_pattern_with(
    source: &str,
    dialect: Dialect,
    construction: ConstructionLabel,
    table: &TagTable,
) -> Result<Pattern, PatternError> {
    let mut parser = Parser {
        toks: lex(source),
        pos: 0,
        dialect,
        table,
        end_column: source.chars().count() + 1,
    };
    let atoms = parser.sequence()?;
    if let Some((col, tok)) = parser.peek() {
        let what = if *tok == Tok::Bar { "`|` outside a group" } else { "unbalanced `)`" };
        return Err(Parser::err(*col, what));
    }
    if atoms.is_empty() {
        return Err(Parser::err(1, "empty pattern"));
    }
    Ok(Pattern {
        atoms,
        dialect,
        construction,
        source: source.to_string(),
    })
}
