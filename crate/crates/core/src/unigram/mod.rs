//! Unigram language-model tokenisation.
//!
//! A model is a set of pieces with log-probabilities. Inference picks, for every pretoken,
//! the segmentation with the highest summed log-probability. In isolated modes spaces are
//! pretoken boundaries and always come out as the lone space token, which is what an
//! unbounded score on the space piece would produce.

mod lattice;
mod trainer;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::textnorm::{self, NormConfig, SpaceMode};
use crate::tokens::{Token, Tokenisation, Tokenizer, NUM_SPECIALS, SPECIAL_TOKENS, UNK_ID};

use lattice::Trie;

pub use trainer::{
    corpus_log_likelihood, em_step, prune_vocabulary, seed_vocabulary, train_unigram, EmStep,
    UnigramTrainConfig,
};

#[derive(Debug, Clone)]
pub struct UnigramModel {
    pieces: Vec<(String, f64)>,
    mode: SpaceMode,
    norm: NormConfig,
    index: HashMap<String, usize>,
    trie: Trie,
    log_probs: Vec<f64>,
}

impl UnigramModel {
    /// Builds a model from pieces in ID order (specials excluded).
    pub fn new(pieces: Vec<(String, f64)>, mode: SpaceMode, norm: NormConfig) -> Result<UnigramModel> {
        let space = norm.space_symbol;
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, (p, lp)) in pieces.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::Format("empty unigram piece".into()));
            }
            if SPECIAL_TOKENS.contains(&p.as_str()) {
                return Err(Error::Format(format!("piece {p:?} clashes with a special token")));
            }
            if lp.is_nan() || *lp > 0.0 {
                return Err(Error::Format(format!("piece {p:?} has invalid log-probability {lp}")));
            }
            let multi = p.chars().nth(1).is_some();
            if mode.isolates() && multi && p.contains(space) {
                return Err(Error::Format(format!("isolated-mode piece {p:?} contains the space symbol")));
            }
            if !mode.isolates() && p.chars().skip(1).any(|c| c == space) {
                return Err(Error::Format(format!("piece {p:?} has a space symbol after its first character")));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate piece {p:?}")));
            }
        }
        if mode.isolates() && !index.contains_key(space.to_string().as_str()) {
            return Err(Error::Format("isolated-mode model lacks the space piece".into()));
        }
        let trie = Trie::new(pieces.iter().map(|(p, _)| p.as_str()));
        let log_probs = pieces.iter().map(|(_, lp)| *lp).collect();
        Ok(UnigramModel { pieces, mode, norm, index, trie, log_probs })
    }

    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Vocabulary size including specials.
    pub fn vocab_size(&self) -> usize {
        NUM_SPECIALS + self.pieces.len()
    }

    pub fn log_prob(&self, piece: &str) -> Option<f64> {
        self.index.get(piece).map(|&i| self.pieces[i].1)
    }

    pub fn token_id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).map(|&i| (NUM_SPECIALS + i) as u32)
    }

    /// Sum of piece probabilities; 1 for a fitted model.
    pub fn total_mass(&self) -> f64 {
        self.log_probs.iter().map(|lp| lp.exp()).sum()
    }

    pub fn with_mode(mut self, mode: SpaceMode) -> Result<Self> {
        if mode.isolates() != self.mode.isolates() {
            return Err(Error::Config(format!("cannot use a {} model in {mode} mode", self.mode)));
        }
        self.mode = mode;
        Ok(self)
    }

    /// Reorders pieces by descending log-probability, ties by string.
    pub(crate) fn sorted(self) -> Result<UnigramModel> {
        let mut pieces = self.pieces;
        pieces.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        UnigramModel::new(pieces, self.mode, self.norm)
    }

    pub(crate) fn trie(&self) -> &Trie {
        &self.trie
    }

    pub(crate) fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Best segmentation of a run of characters, all known to the model.
    fn segment_known(&self, chars: &[char], out: &mut Vec<Token>) {
        let (_, path) = lattice::viterbi(&self.trie, &self.log_probs, chars, None)
            .expect("every known character is a piece");
        for seg in path {
            let text: String = chars[seg.start..seg.end].iter().collect();
            out.push(Token::new(text, (NUM_SPECIALS + seg.piece) as u32));
        }
    }

    fn segment_chars(&self, chars: &[char], out: &mut Vec<Token>) {
        let mut run_start = 0;
        for (i, &c) in chars.iter().enumerate() {
            if !self.trie.knows_char(c) {
                if run_start < i {
                    self.segment_known(&chars[run_start..i], out);
                }
                out.push(Token::unk(c.to_string()));
                run_start = i + 1;
            }
        }
        if run_start < chars.len() {
            self.segment_known(&chars[run_start..], out);
        }
    }

    /// Segments a string with no spaces as one unit; only meaningful for isolated models.
    pub fn segment_unspaced(&self, text: &str) -> Result<Tokenisation> {
        if !self.mode.isolates() {
            return Err(Error::Config(
                "unspaced segmentation needs an isolated-mode model".into(),
            ));
        }
        let normalized = textnorm::normalize_text(text, &self.norm)?;
        let chars: Vec<char> = normalized.chars().filter(|c| !c.is_whitespace()).collect();
        let mut out = Vec::new();
        self.segment_chars(&chars, &mut out);
        Ok(Tokenisation::new(out))
    }
}

/// Viterbi segmentation of one raw line.
pub fn viterbi_tokenize(model: &UnigramModel, text: &str) -> Result<Tokenisation> {
    model.tokenize(text)
}

impl Tokenizer for UnigramModel {
    fn norm_config(&self) -> &NormConfig {
        &self.norm
    }

    fn space_mode(&self) -> SpaceMode {
        self.mode
    }

    fn tokenize_pretoken(&self, pretoken: &str, out: &mut Vec<Token>) {
        let space = self.norm.space_symbol;
        if self.mode.isolates() {
            let mut it = pretoken.chars();
            if it.next() == Some(space) && it.next().is_none() {
                let id = self.token_id(pretoken).unwrap_or(UNK_ID);
                out.push(Token::new(pretoken, id));
                return;
            }
        }
        let chars: Vec<char> = pretoken.chars().collect();
        self.segment_chars(&chars, out);
    }

    fn vocab(&self) -> Vec<String> {
        SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(self.pieces.iter().map(|(p, _)| p.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(pieces: &[(&str, f64)], mode: SpaceMode) -> UnigramModel {
        UnigramModel::new(
            pieces.iter().map(|(p, l)| (p.to_string(), *l)).collect(),
            mode,
            NormConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn hand_worked_segmentations() {
        let m = model(&[("a", -1.0), ("b", -1.0), ("ab", -1.5), ("▁", -1.0)], SpaceMode::Isolated);
        assert_eq!(viterbi_tokenize(&m, "ab").unwrap().texts(), ["ab"]);
        let m = model(&[("a", -1.0), ("b", -1.0), ("ab", -2.5), ("▁", -1.0)], SpaceMode::Isolated);
        assert_eq!(viterbi_tokenize(&m, "ab").unwrap().texts(), ["a", "b"]);
    }

    #[test]
    fn spaces_are_standalone_in_isolated_mode() {
        let m = model(&[("a", -1.0), ("b", -1.0), ("▁", -20.0)], SpaceMode::Isolated);
        let t = m.tokenize("ab  a").unwrap();
        assert_eq!(t.texts(), ["a", "b", "▁", "a"]);
        assert_eq!(t.ids()[2], m.token_id("▁").unwrap());
    }

    #[test]
    fn unknowns_and_empty_input() {
        let m = model(&[("a", -1.0), ("▁", -1.0)], SpaceMode::Isolated);
        let t = m.tokenize("aza").unwrap();
        assert_eq!(t.texts(), ["a", "z", "a"]);
        assert!(t.tokens[1].is_unk());
        assert!(m.tokenize("").unwrap().is_empty());
    }

    #[test]
    fn isolated_pieces_may_not_hold_spaces() {
        let err = UnigramModel::new(
            vec![("▁a".into(), -1.0), ("▁".into(), -1.0)],
            SpaceMode::Isolated,
            NormConfig::default(),
        );
        assert!(matches!(err, Err(Error::Format(_))));
    }

    #[test]
    fn unspaced_demo_requires_isolated_model() {
        let att = model(&[("▁", -1.0), ("a", -1.0)], SpaceMode::Attached);
        assert!(matches!(att.segment_unspaced("aa"), Err(Error::Config(_))));
        let iso = model(&[("▁", -1.0), ("a", -1.0), ("b", -1.0)], SpaceMode::Isolated);
        assert_eq!(iso.segment_unspaced("ab").unwrap().texts(), ["a", "b"]);
        assert!(iso.segment_unspaced("").unwrap().is_empty());
    }
}
