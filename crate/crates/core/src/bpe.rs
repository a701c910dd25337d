//! Byte-pair encoding over characters, in attached or isolated space mode.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::merges::{self, learn_merges, Criterion};
use crate::textnorm::{Corpus, NormConfig, SpaceMode};
use crate::tokens::{Token, Tokenizer, SPECIAL_TOKENS, UNK_ID};

pub use crate::merges::{count_pairs, CountStrategy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BpeTrainConfig {
    pub vocab_size: usize,
    pub strategy: CountStrategy,
}

/// A trained merge list.
///
/// IDs: specials, then the alphabet in code-point order, then each new token in the
/// order its first merge was learned.
#[derive(Debug, Clone)]
pub struct BpeModel {
    alphabet: Vec<char>,
    merges: Vec<MergeRule>,
    mode: SpaceMode,
    norm: NormConfig,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// (left id, right id) -> ascending (rank, merged id); a pair can recur once its parts are rebuilt.
    ranks: HashMap<(u32, u32), Vec<(usize, u32)>>,
}

pub fn train_bpe(corpus: &Corpus, cfg: &BpeTrainConfig, norm: &NormConfig) -> Result<BpeModel> {
    if corpus.space_symbol != norm.space_symbol {
        return Err(Error::Config("corpus and normalization disagree on the space symbol".into()));
    }
    let learned = learn_merges(corpus, cfg.vocab_size, Criterion::Frequency, cfg.strategy)?;
    BpeModel::from_parts(learned.alphabet, learned.merges, corpus.space_mode, norm.clone())
}

/// Minimum vocabulary size accepted for `corpus`.
pub fn minimum_vocab_size(corpus: &Corpus) -> usize {
    merges::minimum_size(corpus)
}

impl BpeModel {
    /// Rebuilds a model from its alphabet and ordered merges.
    pub fn from_parts(
        mut alphabet: Vec<char>,
        merges: Vec<(String, String)>,
        mode: SpaceMode,
        norm: NormConfig,
    ) -> Result<BpeModel> {
        alphabet.sort_unstable();
        alphabet.dedup();
        let mut vocab: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut ids: HashMap<String, u32> = HashMap::new();
        for (i, s) in vocab.iter().enumerate() {
            ids.insert(s.clone(), i as u32);
        }
        for c in &alphabet {
            let s = c.to_string();
            if ids.contains_key(&s) {
                return Err(Error::Format(format!("duplicate alphabet entry {s:?}")));
            }
            ids.insert(s.clone(), vocab.len() as u32);
            vocab.push(s);
        }
        let mut rules = Vec::with_capacity(merges.len());
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (left, right)) in merges.into_iter().enumerate() {
            let (Some(&l), Some(&r)) = (ids.get(&left), ids.get(&right)) else {
                return Err(Error::Format(format!(
                    "merge {rank} ({left:?}, {right:?}) uses a token not yet in the vocabulary"
                )));
            };
            if !merges::pair_eligible(&left, &right, mode, norm.space_symbol) {
                return Err(Error::Format(format!(
                    "merge {rank} ({left:?}, {right:?}) is not allowed in {mode} mode"
                )));
            }
            let merged = format!("{left}{right}");
            let id = match ids.get(&merged) {
                Some(&id) => id,
                None => {
                    let id = vocab.len() as u32;
                    ids.insert(merged.clone(), id);
                    vocab.push(merged);
                    id
                }
            };
            ranks.entry((l, r)).or_insert_with(Vec::new).push((rank, id));
            rules.push(MergeRule { left, right, rank });
        }
        Ok(BpeModel { alphabet, merges: rules, mode, norm, vocab, ids, ranks })
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
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

    /// Applies the merges in rank order to one pretoken.
    fn encode_word(&self, word: &str, out: &mut Vec<Token>) {
        let mut parts: Vec<(u32, String)> = word
            .chars()
            .map(|c| {
                let s = c.to_string();
                (self.ids.get(&s).copied().unwrap_or(UNK_ID), s)
            })
            .collect();
        // Rules apply in rank order, so only ranks at or above the last applied one are live.
        let mut next_rank = 0;
        loop {
            let best = parts
                .windows(2)
                .filter(|w| w[0].0 != UNK_ID && w[1].0 != UNK_ID)
                .filter_map(|w| self.ranks.get(&(w[0].0, w[1].0)))
                .filter_map(|rs| rs.iter().copied().find(|&(rank, _)| rank >= next_rank))
                .min_by_key(|&(rank, _)| rank);
            let Some((rank, merged)) = best else { break };
            let (l, r) = {
                let rule = &self.merges[rank];
                (self.ids[&rule.left], self.ids[&rule.right])
            };
            let mut fused = Vec::with_capacity(parts.len());
            let mut it = parts.into_iter().peekable();
            while let Some((id, s)) = it.next() {
                if id == l && it.peek().map(|p| p.0) == Some(r) {
                    let (_, rs) = it.next().expect("peeked");
                    fused.push((merged, s + &rs));
                } else {
                    fused.push((id, s));
                }
            }
            parts = fused;
            next_rank = rank + 1;
        }
        out.extend(parts.into_iter().map(|(id, s)| Token::new(s, id)));
    }
}

impl Tokenizer for BpeModel {
    fn norm_config(&self) -> &NormConfig {
        &self.norm
    }

    fn space_mode(&self) -> SpaceMode {
        self.mode
    }

    fn tokenize_pretoken(&self, pretoken: &str, out: &mut Vec<Token>) {
        self.encode_word(pretoken, out);
    }

    fn vocab(&self) -> Vec<String> {
        self.vocab.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::NUM_SPECIALS;

    fn corpus(lines: &[&str], mode: SpaceMode) -> Corpus {
        Corpus::from_lines(lines, mode, &NormConfig::default()).unwrap()
    }

    fn train(lines: &[&str], mode: SpaceMode, extra: usize) -> BpeModel {
        let c = corpus(lines, mode);
        let cfg = BpeTrainConfig { vocab_size: minimum_vocab_size(&c) + extra, ..Default::default() };
        train_bpe(&c, &cfg, &NormConfig::default()).unwrap()
    }

    fn pairs(m: &BpeModel) -> Vec<(&str, &str)> {
        m.merges().iter().map(|r| (r.left.as_str(), r.right.as_str())).collect()
    }

    #[test]
    fn single_merge_isolated() {
        let m = train(&["ab ab", "ab"], SpaceMode::Isolated, 1);
        assert_eq!(pairs(&m), [("a", "b")]);
    }

    #[test]
    fn zero_budget_is_character_level() {
        let m = train(&["ab ab", "ab"], SpaceMode::Isolated, 0);
        assert!(m.merges().is_empty());
        let t = m.tokenize("ab ab").unwrap();
        assert_eq!(t.texts(), ["a", "b", "▁", "a", "b"]);
    }

    #[test]
    fn tie_prefers_smaller_concatenation() {
        // ("▁","a") and ("a","a") both occur twice; "aa" < "▁a".
        let m = train(&["aa aa"], SpaceMode::Attached, 1);
        assert_eq!(pairs(&m), [("a", "a")]);
    }

    #[test]
    fn below_minimum_is_config_error() {
        let c = corpus(&["abc"], SpaceMode::Isolated);
        let cfg = BpeTrainConfig { vocab_size: minimum_vocab_size(&c) - 1, ..Default::default() };
        assert!(matches!(train_bpe(&c, &cfg, &NormConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn tokenize_examples() {
        let norm = NormConfig::default();
        let iso = BpeModel::from_parts(
            vec!['a', 'b', '▁'],
            vec![("a".into(), "b".into())],
            SpaceMode::Isolated,
            norm.clone(),
        )
        .unwrap();
        assert_eq!(iso.tokenize("ab ab").unwrap().texts(), ["ab", "▁", "ab"]);
        assert!(iso.tokenize("").unwrap().is_empty());

        let att = BpeModel::from_parts(
            vec!['a', 'b', '▁'],
            vec![("a".into(), "b".into()), ("▁".into(), "ab".into())],
            SpaceMode::Attached,
            norm,
        )
        .unwrap();
        let t = att.tokenize("ab ab").unwrap();
        assert_eq!(t.texts(), ["▁ab", "▁ab"]);
        assert_eq!(t.ids(), [9, 9]);
    }

    #[test]
    fn unknown_characters_become_unk() {
        let m = train(&["ab ab"], SpaceMode::Isolated, 1);
        let t = m.tokenize("abz").unwrap();
        assert_eq!(t.texts(), ["ab", "z"]);
        assert!(t.tokens[1].is_unk());
        assert_eq!(t.displays(), ["ab", "[UNK]"]);
    }

    #[test]
    fn ids_follow_specials_alphabet_merges() {
        let m = train(&["ab ab", "ab"], SpaceMode::Isolated, 1);
        assert_eq!(m.vocab(), ["[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]", "a", "b", "▁", "ab"]);
        assert_eq!(m.vocab_size(), NUM_SPECIALS + m.alphabet().len() + m.merges().len());
    }

    #[test]
    fn isolated_merges_never_cross_spaces() {
        let m = train(&["x y", "x y z", "xy xyz"], SpaceMode::Isolated, 10);
        let alone = m.tokenize("x").unwrap();
        let both = m.tokenize("x y").unwrap();
        assert_eq!(both.tokens[0], alone.tokens[0]);
        assert!(m.merges().iter().all(|r| !r.left.contains('▁') && !r.right.contains('▁')));
    }

    #[test]
    fn rules_apply_in_rank_order_only() {
        // Rank 1 creates "ab" again after rank 0 ("ab","c") has passed.
        let m = BpeModel::from_parts(
            vec!['a', 'b', 'c'],
            vec![
                ("b".into(), "c".into()),
                ("ab".into(), "c".into()),
                ("a".into(), "b".into()),
            ],
            SpaceMode::Isolated,
            NormConfig::default(),
        );
        // "ab" is not a token until rank 2, so rule 1 is rejected as referring to an unknown token.
        assert!(matches!(m, Err(Error::Format(_))));

        let m = BpeModel::from_parts(
            vec!['a', 'b', 'c'],
            vec![
                ("a".into(), "b".into()),
                ("ab".into(), "c".into()),
                ("b".into(), "c".into()),
            ],
            SpaceMode::Isolated,
            NormConfig::default(),
        )
        .unwrap();
        assert_eq!(m.tokenize("abc").unwrap().texts(), ["abc"]);
        assert_eq!(m.tokenize("bcab").unwrap().texts(), ["bc", "ab"]);
    }
}
