//! Token sequences and the tokenizer interface shared by every algorithm.

use crate::error::Result;
use crate::textnorm::{self, NormConfig, SpaceMode};

/// Reserved special tokens, in ID order.
pub const SPECIAL_TOKENS: [&str; 5] = ["[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]"];
pub const UNK_ID: u32 = 0;
pub const NUM_SPECIALS: usize = SPECIAL_TOKENS.len();

pub fn is_special(token: &str) -> bool {
    SPECIAL_TOKENS.contains(&token)
}

/// One output token.
///
/// `text` always holds the surface characters the token covers, even for unknown
/// characters mapped to `[UNK]`, so that detokenization stays lossless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub id: u32,
}

impl Token {
    pub fn new(text: impl Into<String>, id: u32) -> Self {
        Token { text: text.into(), id }
    }

    pub fn unk(text: impl Into<String>) -> Self {
        Token { text: text.into(), id: UNK_ID }
    }

    pub fn is_unk(&self) -> bool {
        self.id == UNK_ID
    }

    /// Display form: the surface string, or `[UNK]` for unknowns.
    pub fn display(&self) -> &str {
        if self.is_unk() {
            SPECIAL_TOKENS[UNK_ID as usize]
        } else {
            &self.text
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenisation {
    pub tokens: Vec<Token>,
}

impl Tokenisation {
    pub fn new(tokens: Vec<Token>) -> Self {
        Tokenisation { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn displays(&self) -> Vec<&str> {
        self.tokens.iter().map(Token::display).collect()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    /// Removes every token that is exactly the space symbol.
    pub fn strip_spaces(&self, space_symbol: char) -> Tokenisation {
        textnorm::strip_spaces(self, space_symbol)
    }
}

/// A trained subword model able to segment normalized text.
pub trait Tokenizer: Send + Sync {
    fn norm_config(&self) -> &NormConfig;

    fn space_mode(&self) -> SpaceMode;

    /// Segments one pretoken, appending to `out`.
    ///
    /// In isolated modes a pretoken equal to the space symbol must come back as the
    /// single space token.
    fn tokenize_pretoken(&self, pretoken: &str, out: &mut Vec<Token>);

    /// All vocabulary entries in ID order, specials included.
    fn vocab(&self) -> Vec<String>;

    fn space_symbol(&self) -> char {
        self.norm_config().space_symbol
    }

    /// Normalizes a raw line and segments it.
    fn tokenize(&self, line: &str) -> Result<Tokenisation> {
        let pretokens = textnorm::normalize_line(line, self.space_mode(), self.norm_config())?;
        Ok(self.tokenize_pretokens(&pretokens))
    }

    /// Segments already-normalized pretokens, applying no-spaces stripping where the mode asks for it.
    fn tokenize_pretokens(&self, pretokens: &[String]) -> Tokenisation {
        let mut out = Vec::new();
        for p in pretokens {
            self.tokenize_pretoken(p, &mut out);
        }
        let tokens = Tokenisation::new(out);
        if self.space_mode() == SpaceMode::IsolatedNoSpaces {
            tokens.strip_spaces(self.space_symbol())
        } else {
            tokens
        }
    }
}
