//! Text normalization, space handling and pre-splitting.
//!
//! Whitespace is replaced by a space symbol (default `▁`). What happens next depends on
//! the [`SpaceMode`]:
//!
//! * `Attached`: the symbol is prepended to every word, including the first word of the
//!   sentence, and pretokens split *before* each symbol (`"ab ab"` → `["▁ab", "▁ab"]`).
//! * `Isolated` / `IsolatedNoSpaces`: every symbol is its own pretoken
//!   (`"ab ab"` → `["ab", "▁", "ab"]`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::tokens::Tokenisation;

pub const DEFAULT_SPACE_SYMBOL: char = '\u{2581}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceMode {
    /// Tokens may begin with the space symbol.
    Attached,
    /// Spaces are always standalone tokens.
    Isolated,
    /// As `Isolated`, with space tokens removed from the output.
    IsolatedNoSpaces,
}

impl SpaceMode {
    pub fn isolates(self) -> bool {
        !matches!(self, SpaceMode::Attached)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpaceMode::Attached => "attached",
            SpaceMode::Isolated => "isolated",
            SpaceMode::IsolatedNoSpaces => "isolated-no-spaces",
        }
    }
}

impl fmt::Display for SpaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpaceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attached" => Ok(SpaceMode::Attached),
            "isolated" => Ok(SpaceMode::Isolated),
            "isolated-no-spaces" => Ok(SpaceMode::IsolatedNoSpaces),
            other => Err(Error::Format(format!("unknown space mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnicodeForm {
    #[default]
    None,
    Nfkc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormConfig {
    pub space_symbol: char,
    pub unicode_normalization: UnicodeForm,
    /// Collapse whitespace runs into one space and trim both ends.
    pub collapse_repeated_whitespace: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            space_symbol: DEFAULT_SPACE_SYMBOL,
            unicode_normalization: UnicodeForm::None,
            collapse_repeated_whitespace: true,
        }
    }
}

/// Canonical normalized form of a raw line, with whitespace as plain `' '`.
///
/// This is the text a lossless tokenizer reproduces on detokenization.
pub fn normalize_text(line: &str, cfg: &NormConfig) -> Result<String> {
    let text: String = match cfg.unicode_normalization {
        UnicodeForm::None => line.to_owned(),
        UnicodeForm::Nfkc => line.nfkc().collect(),
    };
    if text.contains(cfg.space_symbol) {
        return Err(Error::Normalization(format!(
            "input already contains the space symbol {:?}",
            cfg.space_symbol
        )));
    }
    Ok(if cfg.collapse_repeated_whitespace {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        text.chars()
            .map(|c| if c.is_whitespace() { ' ' } else { c })
            .collect()
    })
}

/// Splits normalized text (whitespace already mapped to `' '`) into pretokens.
pub fn pretokenize(text: &str, mode: SpaceMode, space: char) -> Vec<String> {
    let mut out = Vec::new();
    if mode.isolates() {
        let mut word = String::new();
        for c in text.chars() {
            if c == ' ' {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(space.to_string());
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    } else {
        if text.is_empty() {
            return out;
        }
        let mut word = String::from(space);
        for c in text.chars() {
            if c == ' ' {
                out.push(std::mem::replace(&mut word, String::from(space)));
            } else {
                word.push(c);
            }
        }
        out.push(word);
    }
    out
}

/// Normalizes one raw line into pretokens for the given mode.
pub fn normalize_line(line: &str, mode: SpaceMode, cfg: &NormConfig) -> Result<Vec<String>> {
    let text = normalize_text(line, cfg)?;
    Ok(pretokenize(&text, mode, cfg.space_symbol))
}

/// Maps tokens back to normalized text.
///
/// Lossless for `Attached` and `Isolated`; `IsolatedNoSpaces` drops all whitespace.
pub fn detokenize(tokens: &Tokenisation, mode: SpaceMode, space: char) -> String {
    let joined: String = tokens.tokens.iter().map(|t| t.text.as_str()).collect();
    match mode {
        SpaceMode::Attached => {
            let text: String = joined
                .chars()
                .map(|c| if c == space { ' ' } else { c })
                .collect();
            match text.strip_prefix(' ') {
                Some(rest) => rest.to_owned(),
                None => text,
            }
        }
        SpaceMode::Isolated => joined
            .chars()
            .map(|c| if c == space { ' ' } else { c })
            .collect(),
        SpaceMode::IsolatedNoSpaces => joined
            .chars()
            .filter(|&c| c != space && !c.is_whitespace())
            .collect(),
    }
}

/// Drops every token equal to the space symbol; IDs and order of the rest are kept.
pub fn strip_spaces(tokens: &Tokenisation, space: char) -> Tokenisation {
    let mut buf = [0u8; 4];
    let space: &str = space.encode_utf8(&mut buf);
    Tokenisation::new(
        tokens
            .tokens
            .iter()
            .filter(|t| t.text != space)
            .cloned()
            .collect(),
    )
}

/// Normalized training text: one list of pretokens per sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
    pub space_mode: SpaceMode,
    pub space_symbol: char,
}

impl Corpus {
    pub fn from_lines<S: AsRef<str> + Sync>(
        lines: &[S],
        mode: SpaceMode,
        cfg: &NormConfig,
    ) -> Result<Corpus> {
        let sentences = lines
            .par_iter()
            .map(|l| normalize_line(l.as_ref(), mode, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            sentences,
            space_mode: mode,
            space_symbol: cfg.space_symbol,
        })
    }

    /// Reads LF-separated lines, rejecting invalid UTF-8 with the offending line number.
    pub fn from_reader<R: BufRead>(reader: R, mode: SpaceMode, cfg: &NormConfig) -> Result<Corpus> {
        let lines = read_lines(reader)?;
        Corpus::from_lines(&lines, mode, cfg)
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.iter().all(|s| s.is_empty())
    }

    pub fn num_pretokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn num_chars(&self) -> usize {
        self.sentences
            .iter()
            .flatten()
            .map(|p| p.chars().count())
            .sum()
    }

    /// Occurrence count of every distinct pretoken.
    pub fn pretoken_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for p in self.sentences.iter().flatten() {
            *counts.entry(p.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Every distinct character, the space symbol always included.
    pub fn alphabet(&self) -> BTreeSet<char> {
        let mut chars: BTreeSet<char> = self.sentences.iter().flatten().flat_map(|p| p.chars()).collect();
        chars.insert(self.space_symbol);
        chars
    }
}

/// Splits raw bytes on LF and decodes each line as UTF-8.
pub fn read_lines<R: BufRead>(mut reader: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        let line = String::from_utf8(std::mem::take(&mut buf))
            .map_err(|_| Error::Decode { line: lines.len() + 1 })?;
        lines.push(line);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::Token;

    fn toks(items: &[&str]) -> Tokenisation {
        Tokenisation::new(items.iter().enumerate().map(|(i, s)| Token::new(*s, i as u32 + 5)).collect())
    }

    #[test]
    fn attached_prepends_to_every_word() {
        let cfg = NormConfig::default();
        assert_eq!(normalize_line("ab ab", SpaceMode::Attached, &cfg).unwrap(), ["▁ab", "▁ab"]);
    }

    #[test]
    fn isolated_makes_space_pretokens() {
        let cfg = NormConfig::default();
        assert_eq!(normalize_line("ab ab", SpaceMode::Isolated, &cfg).unwrap(), ["ab", "▁", "ab"]);
        assert!(normalize_line("", SpaceMode::Isolated, &cfg).unwrap().is_empty());
        assert!(normalize_line("", SpaceMode::Attached, &cfg).unwrap().is_empty());
    }

    #[test]
    fn collapses_and_trims_whitespace() {
        let cfg = NormConfig::default();
        assert_eq!(
            normalize_line("  a \t\t b ", SpaceMode::Isolated, &cfg).unwrap(),
            ["a", "▁", "b"]
        );
        let raw = NormConfig { collapse_repeated_whitespace: false, ..NormConfig::default() };
        assert_eq!(
            normalize_line(" a  b", SpaceMode::Isolated, &raw).unwrap(),
            ["▁", "a", "▁", "▁", "b"]
        );
        assert_eq!(
            normalize_line(" a  b", SpaceMode::Attached, &raw).unwrap(),
            ["▁", "▁a", "▁", "▁b"]
        );
    }

    #[test]
    fn rejects_literal_space_symbol() {
        let cfg = NormConfig::default();
        let err = normalize_line("a▁b", SpaceMode::Isolated, &cfg).unwrap_err();
        assert!(matches!(err, Error::Normalization(_)));
    }

    #[test]
    fn nfkc_is_opt_in() {
        let nfkc = NormConfig { unicode_normalization: UnicodeForm::Nfkc, ..NormConfig::default() };
        assert_eq!(normalize_text("ﬁ", &nfkc).unwrap(), "fi");
        assert_eq!(normalize_text("ﬁ", &NormConfig::default()).unwrap(), "ﬁ");
    }

    #[test]
    fn detokenize_examples() {
        assert_eq!(detokenize(&toks(&["▁ab", "▁ab"]), SpaceMode::Attached, '▁'), "ab ab");
        assert_eq!(detokenize(&toks(&["ab", "▁", "ab"]), SpaceMode::Isolated, '▁'), "ab ab");
        assert_eq!(detokenize(&toks(&["ab", "ab"]), SpaceMode::IsolatedNoSpaces, '▁'), "abab");
    }

    #[test]
    fn strip_spaces_examples() {
        let input = toks(&["This", "▁", "is", "▁", "an", "▁", "input", "▁", "sentence", "."]);
        let stripped = strip_spaces(&input, '▁');
        assert_eq!(stripped.texts(), ["This", "is", "an", "input", "sentence", "."]);
        assert_eq!(stripped.ids(), [5, 7, 9, 11, 13, 14]);
        assert!(strip_spaces(&toks(&["▁"]), '▁').is_empty());
        assert_eq!(strip_spaces(&toks(&["ab", "ab"]), '▁'), toks(&["ab", "ab"]));
        assert_eq!(strip_spaces(&stripped, '▁'), stripped);
    }

    #[test]
    fn invalid_utf8_reports_line() {
        let bytes: &[u8] = b"ok line\n\xff\xfe\n";
        let err = Corpus::from_reader(bytes, SpaceMode::Isolated, &NormConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Decode { line: 2 }));
    }

    #[test]
    fn corpus_alphabet_includes_space() {
        let c = Corpus::from_lines(&["ba"], SpaceMode::Isolated, &NormConfig::default()).unwrap();
        assert_eq!(c.alphabet().into_iter().collect::<String>(), "ab▁");
    }
}
