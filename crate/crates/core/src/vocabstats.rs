//! Vocabulary analytics: space degeneracy, overlap between two vocabularies and affix counts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::textnorm::DEFAULT_SPACE_SYMBOL;
use crate::tokens::is_special;

const BUNDLED_ENGLISH: &str = include_str!("../data/affixes-en-v1.txt");

/// Prefix and suffix inventories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AffixLexicon {
    pub prefixes: BTreeSet<String>,
    pub suffixes: BTreeSet<String>,
    pub source: Option<PathBuf>,
}

impl AffixLexicon {
    pub fn from_sets<'a>(
        prefixes: impl IntoIterator<Item = &'a str>,
        suffixes: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        AffixLexicon {
            prefixes: prefixes.into_iter().map(str::to_string).collect(),
            suffixes: suffixes.into_iter().map(str::to_string).collect(),
            source: None,
        }
    }

    /// Parses the `[prefixes]` / `[suffixes]` section format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = AffixLexicon::default();
        let mut section: Option<bool> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[prefixes]" => section = Some(true),
                "[suffixes]" => section = Some(false),
                _ => {
                    let bad = |why: &str| Error::Format(format!("lexicon line {}: {why}", n + 1));
                    let Some(is_prefix) = section else {
                        return Err(bad("entry outside a section"));
                    };
                    if line.chars().any(|c| c.is_whitespace() || c == DEFAULT_SPACE_SYMBOL) {
                        return Err(bad("entry contains a space"));
                    }
                    if line.to_lowercase() != line {
                        return Err(bad("entry is not lowercase"));
                    }
                    let set = if is_prefix { &mut lex.prefixes } else { &mut lex.suffixes };
                    set.insert(line.to_string());
                }
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lex = Self::parse(&text)?;
        lex.source = Some(path.to_path_buf());
        Ok(lex)
    }

    /// The English list shipped with the crate.
    pub fn bundled_english() -> Self {
        Self::parse(BUNDLED_ENGLISH).expect("bundled lexicon is well formed")
    }
}

/// Non-special tokens, as a set.
fn content_tokens<S: AsRef<str>>(vocab: &[S]) -> BTreeSet<&str> {
    vocab.iter().map(AsRef::as_ref).filter(|t| !is_special(t)).collect()
}

/// Non-special tokens with leading space symbols removed, empty results dropped.
pub fn strip_vocab<S: AsRef<str>>(vocab: &[S], space: char) -> BTreeSet<String> {
    content_tokens(vocab)
        .into_iter()
        .map(|t| t.trim_start_matches(space))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracy {
    /// Pairs `(t, space + t)` that both occur.
    pub duplicates: Vec<(String, String)>,
    pub vocab_size: usize,
    pub ratio: f64,
}

pub fn degeneracy<S: AsRef<str>>(vocab: &[S], space: char) -> Degeneracy {
    let tokens = content_tokens(vocab);
    let mut duplicates = Vec::new();
    let mut spaced = String::new();
    for &t in &tokens {
        spaced.clear();
        spaced.push(space);
        spaced.push_str(t);
        if tokens.contains(spaced.as_str()) {
            duplicates.push((t.to_string(), spaced.clone()));
        }
    }
    let ratio = if tokens.is_empty() { 0.0 } else { duplicates.len() as f64 / tokens.len() as f64 };
    Degeneracy { duplicates, vocab_size: tokens.len(), ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    pub shared: usize,
    /// Shared share of the stripped default vocabulary.
    pub forward: f64,
    /// Shared share of the modified vocabulary.
    pub converse: f64,
}

pub fn overlap<S: AsRef<str>, T: AsRef<str>>(default_vocab: &[S], modified_vocab: &[T], space: char) -> Overlap {
    let default = strip_vocab(default_vocab, space);
    let modified: BTreeSet<String> = content_tokens(modified_vocab).into_iter().map(str::to_string).collect();
    let shared = default.intersection(&modified).count();
    let ratio = |n: usize| if n == 0 { 0.0 } else { shared as f64 / n as f64 };
    Overlap { shared, forward: ratio(default.len()), converse: ratio(modified.len()) }
}

/// Vocabulary entries (space-stripped) that exactly match a lexicon prefix / suffix.
pub fn affix_counts<S: AsRef<str>>(vocab: &[S], lexicon: &AffixLexicon, space: char) -> (usize, usize) {
    let stripped = strip_vocab(vocab, space);
    (
        stripped.iter().filter(|t| lexicon.prefixes.contains(*t)).count(),
        stripped.iter().filter(|t| lexicon.suffixes.contains(*t)).count(),
    )
}
