//! Plain-text model files.
//!
//! ```text
//! spacetok-model 1
//! algorithm<TAB>bpe
//! mode<TAB>isolated
//! space_symbol<TAB>▁
//! normalization<TAB>none
//! collapse_whitespace<TAB>true
//! specials<TAB>[UNK] [PAD] [CLS] [SEP] [MASK]
//! alphabet<TAB>abc▁                 (bpe only)
//! max_input_word_length<TAB>100     (wordpiece only)
//! end-header
//! <body>
//! ```
//!
//! Body lines are `left<TAB>right<TAB>rank` for BPE, `piece<TAB>logprob` for unigram and
//! one token per line for WordPiece. Backslash, tab, newline, carriage return and space
//! are escaped inside fields. Log-probabilities use the shortest decimal that parses back
//! to the same value, so loading and saving a written file reproduces it byte for byte.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bpe::BpeModel;
use crate::error::{Error, Result};
use crate::textnorm::{NormConfig, SpaceMode, UnicodeForm};
use crate::tokens::{Token, Tokenizer, SPECIAL_TOKENS};
use crate::unigram::UnigramModel;
use crate::wordpiece::WordPieceModel;

pub const MAGIC: &str = "spacetok-model 1";
const END_HEADER: &str = "end-header";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bpe,
    Unigram,
    WordPiece,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bpe => "bpe",
            Algorithm::Unigram => "unigram",
            Algorithm::WordPiece => "wordpiece",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpe" => Ok(Algorithm::Bpe),
            "unigram" => Ok(Algorithm::Unigram),
            "wordpiece" => Ok(Algorithm::WordPiece),
            other => Err(Error::Format(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// A model of any of the three algorithms.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Bpe(BpeModel),
    Unigram(UnigramModel),
    WordPiece(WordPieceModel),
}

impl AnyModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AnyModel::Bpe(_) => Algorithm::Bpe,
            AnyModel::Unigram(_) => Algorithm::Unigram,
            AnyModel::WordPiece(_) => Algorithm::WordPiece,
        }
    }

    pub fn as_tokenizer(&self) -> &dyn Tokenizer {
        match self {
            AnyModel::Bpe(m) => m,
            AnyModel::Unigram(m) => m,
            AnyModel::WordPiece(m) => m,
        }
    }

    /// Fails with a format error unless the model uses `algorithm`.
    pub fn expect_algorithm(self, algorithm: Algorithm) -> Result<Self> {
        if self.algorithm() != algorithm {
            return Err(Error::Format(format!(
                "model file holds a {} model, expected {algorithm}",
                self.algorithm()
            )));
        }
        Ok(self)
    }

    /// Fails with a format error unless the model was stored in `mode`.
    pub fn expect_mode(self, mode: SpaceMode) -> Result<Self> {
        if self.space_mode() != mode {
            return Err(Error::Format(format!(
                "model file holds a {} model, expected {mode}",
                self.space_mode()
            )));
        }
        Ok(self)
    }

    pub fn with_mode(self, mode: SpaceMode) -> Result<Self> {
        Ok(match self {
            AnyModel::Bpe(m) => AnyModel::Bpe(m.with_mode(mode)?),
            AnyModel::Unigram(m) => AnyModel::Unigram(m.with_mode(mode)?),
            AnyModel::WordPiece(m) => AnyModel::WordPiece(m.with_mode(mode)?),
        })
    }
}

impl Tokenizer for AnyModel {
    fn norm_config(&self) -> &NormConfig {
        self.as_tokenizer().norm_config()
    }

    fn space_mode(&self) -> SpaceMode {
        self.as_tokenizer().space_mode()
    }

    fn tokenize_pretoken(&self, pretoken: &str, out: &mut Vec<Token>) {
        self.as_tokenizer().tokenize_pretoken(pretoken, out)
    }

    fn vocab(&self) -> Vec<String> {
        self.as_tokenizer().vocab()
    }
}

impl From<BpeModel> for AnyModel {
    fn from(m: BpeModel) -> Self {
        AnyModel::Bpe(m)
    }
}

impl From<UnigramModel> for AnyModel {
    fn from(m: UnigramModel) -> Self {
        AnyModel::Unigram(m)
    }
}

impl From<WordPieceModel> for AnyModel {
    fn from(m: WordPieceModel) -> Self {
        AnyModel::WordPiece(m)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ' ' => out.push_str("\\s"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match it.next() {
            Some('\\') => '\\',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            Some('s') => ' ',
            _ => return Err(Error::Format(format!("line {line}: bad escape in {s:?}"))),
        });
    }
    Ok(out)
}

/// Serializes a model.
pub fn model_to_string(model: &AnyModel) -> String {
    let norm = model.norm_config();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let mut kv = |k: &str, v: &str| {
        out.push_str(k);
        out.push('\t');
        out.push_str(v);
        out.push('\n');
    };
    kv("algorithm", model.algorithm().as_str());
    kv("mode", model.space_mode().as_str());
    kv("space_symbol", &escape(&norm.space_symbol.to_string()));
    kv(
        "normalization",
        match norm.unicode_normalization {
            UnicodeForm::None => "none",
            UnicodeForm::Nfkc => "nfkc",
        },
    );
    kv("collapse_whitespace", if norm.collapse_repeated_whitespace { "true" } else { "false" });
    kv("specials", &SPECIAL_TOKENS.join(" "));
    match model {
        AnyModel::Bpe(m) => kv("alphabet", &escape(&m.alphabet().iter().collect::<String>())),
        AnyModel::WordPiece(m) => kv("max_input_word_length", &m.max_input_word_length().to_string()),
        AnyModel::Unigram(_) => {}
    }
    out.push_str(END_HEADER);
    out.push('\n');
    match model {
        AnyModel::Bpe(m) => {
            for r in m.merges() {
                let _ = writeln!(out, "{}\t{}\t{}", escape(&r.left), escape(&r.right), r.rank);
            }
        }
        AnyModel::Unigram(m) => {
            for (p, lp) in m.pieces() {
                let _ = writeln!(out, "{}\t{}", escape(p), lp);
            }
        }
        AnyModel::WordPiece(m) => {
            for t in m.tokens() {
                let _ = writeln!(out, "{}", escape(t));
            }
        }
    }
    out
}

/// Parses a model written by [`model_to_string`].
pub fn parse_model(text: &str) -> Result<AnyModel> {
    let bad = |line: usize, msg: String| Error::Format(format!("model line {line}: {msg}"));
    let mut lines = text.split_terminator('\n').enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(Error::Format(format!("missing {MAGIC:?} header"))),
    }
    let mut header: Vec<(usize, &str, &str)> = Vec::new();
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        if line == END_HEADER {
            ended = true;
            break;
        }
        let (k, v) = line.split_once('\t').ok_or_else(|| bad(n, format!("malformed header line {line:?}")))?;
        header.push((n, k, v));
    }
    if !ended {
        return Err(Error::Format(format!("missing {END_HEADER:?} line")));
    }
    let field = |key: &str| -> Result<(usize, &str)> {
        header
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(n, _, v)| (*n, *v))
            .ok_or_else(|| Error::Format(format!("model header lacks {key:?}")))
    };

    let algorithm: Algorithm = field("algorithm")?.1.parse()?;
    let mode: SpaceMode = field("mode")?.1.parse()?;
    let (n, sym) = field("space_symbol")?;
    let sym = unescape(sym, n)?;
    let mut it = sym.chars();
    let (Some(space_symbol), None) = (it.next(), it.next()) else {
        return Err(bad(n, format!("space symbol {sym:?} is not one character")));
    };
    let (n, form) = field("normalization")?;
    let unicode_normalization = match form {
        "none" => UnicodeForm::None,
        "nfkc" => UnicodeForm::Nfkc,
        other => return Err(bad(n, format!("unknown normalization {other:?}"))),
    };
    let (n, collapse) = field("collapse_whitespace")?;
    let collapse_repeated_whitespace = collapse.parse::<bool>().map_err(|_| bad(n, format!("bad boolean {collapse:?}")))?;
    let (n, specials) = field("specials")?;
    if specials != SPECIAL_TOKENS.join(" ") {
        return Err(bad(n, format!("unsupported special tokens {specials:?}")));
    }
    let norm = NormConfig { space_symbol, unicode_normalization, collapse_repeated_whitespace };

    let body: Vec<(usize, &str)> = lines.collect();
    Ok(match algorithm {
        Algorithm::Bpe => {
            let (n, alpha) = field("alphabet")?;
            let alphabet: Vec<char> = unescape(alpha, n)?.chars().collect();
            let mut merges = Vec::with_capacity(body.len());
            for (i, (n, line)) in body.into_iter().enumerate() {
                let parts: Vec<&str> = line.split('\t').collect();
                let [l, r, rank] = parts[..] else {
                    return Err(bad(n, format!("expected left, right, rank in {line:?}")));
                };
                if rank.parse::<usize>().ok() != Some(i) {
                    return Err(bad(n, format!("merge rank {rank:?} out of sequence")));
                }
                merges.push((unescape(l, n)?, unescape(r, n)?));
            }
            AnyModel::Bpe(BpeModel::from_parts(alphabet, merges, mode, norm)?)
        }
        Algorithm::Unigram => {
            let mut pieces = Vec::with_capacity(body.len());
            for (n, line) in body {
                let (p, lp) = line.split_once('\t').ok_or_else(|| bad(n, format!("expected piece, logprob in {line:?}")))?;
                let lp: f64 = lp.parse().map_err(|_| bad(n, format!("bad log-probability {lp:?}")))?;
                pieces.push((unescape(p, n)?, lp));
            }
            AnyModel::Unigram(UnigramModel::new(pieces, mode, norm)?)
        }
        Algorithm::WordPiece => {
            let (n, max) = field("max_input_word_length")?;
            let max: usize = max.parse().map_err(|_| bad(n, format!("bad length {max:?}")))?;
            let tokens = body.into_iter().map(|(n, l)| unescape(l, n)).collect::<Result<Vec<_>>>()?;
            AnyModel::WordPiece(WordPieceModel::new(tokens, mode, norm)?.with_max_input_word_length(max))
        }
    })
}

pub fn save_model(model: &AnyModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::{train_bpe, BpeTrainConfig};
    use crate::textnorm::Corpus;

    fn corpus(mode: SpaceMode) -> Corpus {
        Corpus::from_lines(&["the cat sat on the mat", "a cat and a hat"], mode, &NormConfig::default()).unwrap()
    }

    fn roundtrip(model: AnyModel) {
        let text = model_to_string(&model);
        let back = parse_model(&text).unwrap();
        assert_eq!(model_to_string(&back), text);
        assert_eq!(back.vocab(), model.vocab());
    }

    #[test]
    fn bpe_roundtrip() {
        for mode in [SpaceMode::Attached, SpaceMode::Isolated] {
            let cfg = BpeTrainConfig { vocab_size: 30, ..Default::default() };
            roundtrip(train_bpe(&corpus(mode), &cfg, &NormConfig::default()).unwrap().into());
        }
    }

    #[test]
    fn unigram_roundtrip_keeps_exact_floats() {
        let pieces = vec![
            ("▁".to_string(), 0.1f64.ln()),
            ("a b".to_string(), -1.0 / 3.0),
            ("x\\y".to_string(), f64::NEG_INFINITY),
        ];
        let m = UnigramModel::new(pieces, SpaceMode::Isolated, NormConfig::default());
        // A multi-character isolated piece holding ' ' is fine; only the space symbol is reserved.
        let m = m.unwrap();
        let text = model_to_string(&m.clone().into());
        let AnyModel::Unigram(back) = parse_model(&text).unwrap() else { panic!() };
        for ((p, a), (q, b)) in m.pieces().iter().zip(back.pieces()) {
            assert_eq!(p, q);
            assert_eq!(a.to_bits(), b.to_bits());
        }
        roundtrip(m.into());
    }

    #[test]
    fn wordpiece_roundtrip() {
        let norm = NormConfig { unicode_normalization: UnicodeForm::Nfkc, ..Default::default() };
        let m = WordPieceModel::new(vec!["a".into(), "▁".into(), "ab".into()], SpaceMode::Isolated, norm)
            .unwrap()
            .with_max_input_word_length(7);
        roundtrip(m.into());
    }

    #[test]
    fn mismatches_and_damage_are_format_errors() {
        let cfg = BpeTrainConfig { vocab_size: 30, ..Default::default() };
        let m: AnyModel = train_bpe(&corpus(SpaceMode::Isolated), &cfg, &NormConfig::default()).unwrap().into();
        let text = model_to_string(&m);
        assert!(matches!(parse_model(&text).unwrap().expect_algorithm(Algorithm::Unigram), Err(Error::Format(_))));
        assert!(matches!(parse_model(&text).unwrap().expect_mode(SpaceMode::Attached), Err(Error::Format(_))));
        assert!(matches!(parse_model(&text[1..]), Err(Error::Format(_))));
        let truncated = text.replace("end-header\n", "");
        assert!(matches!(parse_model(&truncated), Err(Error::Format(_))));
        let reranked = text.replacen("\t0\n", "\t5\n", 1);
        assert!(matches!(parse_model(&reranked), Err(Error::Format(_))));
    }
}
