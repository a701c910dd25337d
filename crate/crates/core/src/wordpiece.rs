//! WordPiece: merge training scored by `count(l,r) / (count(l) * count(r))`, inference by
//! greedy longest match.
//!
//! Tokens use the space-symbol convention throughout: in attached mode word-initial
//! tokens start with `▁` and continuations carry no marker.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::merges::{learn_merges, Criterion, CountStrategy};
use crate::textnorm::{Corpus, NormConfig, SpaceMode};
use crate::tokens::{Token, Tokenizer, NUM_SPECIALS, SPECIAL_TOKENS};

pub const DEFAULT_MAX_INPUT_WORD_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WordPieceTrainConfig {
    pub vocab_size: usize,
    pub strategy: CountStrategy,
}

#[derive(Debug, Clone)]
pub struct WordPieceModel {
    /// Non-special tokens in ID order.
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    mode: SpaceMode,
    norm: NormConfig,
    max_input_word_length: usize,
    max_token_chars: usize,
}

pub fn train_wordpiece(corpus: &Corpus, cfg: &WordPieceTrainConfig, norm: &NormConfig) -> Result<WordPieceModel> {
    if corpus.space_symbol != norm.space_symbol {
        return Err(Error::Config("corpus and normalization disagree on the space symbol".into()));
    }
    let learned = learn_merges(corpus, cfg.vocab_size, Criterion::Likelihood, cfg.strategy)?;
    WordPieceModel::new(learned.tokens, corpus.space_mode, norm.clone())
}

impl WordPieceModel {
    /// Builds a model from its non-special tokens in ID order.
    pub fn new(tokens: Vec<String>, mode: SpaceMode, norm: NormConfig) -> Result<WordPieceModel> {
        let space = norm.space_symbol;
        let mut ids = HashMap::with_capacity(tokens.len() + NUM_SPECIALS);
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            ids.insert(s.to_string(), i as u32);
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Format("empty wordpiece token".into()));
            }
            if mode.isolates() && t.chars().nth(1).is_some() && t.contains(space) {
                return Err(Error::Format(format!("isolated-mode token {t:?} contains the space symbol")));
            }
            if ids.insert(t.clone(), (NUM_SPECIALS + i) as u32).is_some() {
                return Err(Error::Format(format!("duplicate token {t:?}")));
            }
        }
        let max_token_chars = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0);
        Ok(WordPieceModel {
            tokens,
            ids,
            mode,
            norm,
            max_input_word_length: DEFAULT_MAX_INPUT_WORD_LENGTH,
            max_token_chars,
        })
    }

    pub fn with_max_input_word_length(mut self, n: usize) -> Self {
        self.max_input_word_length = n;
        self
    }

    pub fn max_input_word_length(&self) -> usize {
        self.max_input_word_length
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> usize {
        NUM_SPECIALS + self.tokens.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn with_mode(mut self, mode: SpaceMode) -> Result<Self> {
        if mode.isolates() != self.mode.isolates() {
            return Err(Error::Config(format!("cannot use a {} model in {mode} mode", self.mode)));
        }
        self.mode = mode;
        Ok(self)
    }

    /// Greedy longest-prefix matching; any failure turns the whole pretoken into one UNK.
    fn greedy(&self, word: &str, out: &mut Vec<Token>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > self.max_input_word_length {
            out.push(Token::unk(word));
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < chars.len() {
            let mut found = None;
            let mut end = chars.len().min(start + self.max_token_chars);
            while end > start {
                candidate.clear();
                candidate.extend(&chars[start..end]);
                if let Some(&id) = self.ids.get(&candidate) {
                    if id as usize >= NUM_SPECIALS {
                        found = Some((end, id));
                        break;
                    }
                }
                end -= 1;
            }
            match found {
                Some((end, id)) => {
                    pieces.push(Token::new(chars[start..end].iter().collect::<String>(), id));
                    start = end;
                }
                None => {
                    out.push(Token::unk(word));
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

impl Tokenizer for WordPieceModel {
    fn norm_config(&self) -> &NormConfig {
        &self.norm
    }

    fn space_mode(&self) -> SpaceMode {
        self.mode
    }

    fn tokenize_pretoken(&self, pretoken: &str, out: &mut Vec<Token>) {
        self.greedy(pretoken, out);
    }

    fn vocab(&self) -> Vec<String> {
        SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(self.tokens.iter().cloned())
            .collect()
    }
}
