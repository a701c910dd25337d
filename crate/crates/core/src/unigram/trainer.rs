use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{self, Trie};
use super::UnigramModel;
use crate::error::{Error, Result};
use crate::textnorm::{Corpus, NormConfig};
use crate::tokens::NUM_SPECIALS;

/// Expectation work is split into this many contiguous chunks whatever the thread count,
/// so floating-point sums are reduced in the same order every run.
const REDUCTION_CHUNKS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnigramTrainConfig {
    /// Final vocabulary size, specials included.
    pub target_size: usize,
    pub seed_size: usize,
    pub max_piece_length: usize,
    pub em_iterations_per_round: usize,
    /// Fraction of pieces kept per pruning round.
    pub shrink_factor: f64,
}

impl Default for UnigramTrainConfig {
    fn default() -> Self {
        UnigramTrainConfig {
            target_size: 16_000,
            seed_size: 1_000_000,
            max_piece_length: 16,
            em_iterations_per_round: 2,
            shrink_factor: 0.75,
        }
    }
}

impl UnigramTrainConfig {
    fn validate(&self, corpus: &Corpus) -> Result<()> {
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        if self.max_piece_length == 0 {
            return Err(Error::Config("max piece length must be positive".into()));
        }
        let min = NUM_SPECIALS + corpus.alphabet().len();
        if self.target_size < min {
            return Err(Error::Config(format!(
                "vocabulary size {} is below the minimum {min} ({NUM_SPECIALS} specials + {} characters)",
                self.target_size,
                min - NUM_SPECIALS
            )));
        }
        Ok(())
    }
}

type Words = Vec<(Vec<char>, u64)>;

fn corpus_words(corpus: &Corpus) -> Words {
    corpus
        .pretoken_counts()
        .into_iter()
        .map(|(w, c)| (w.chars().collect(), c))
        .collect()
}

/// Candidate pieces with occurrence counts.
///
/// Substrings are enumerated inside pretokens up to `max_piece_length` characters. In
/// isolated mode no multi-character candidate contains the space symbol; in attached
/// mode the symbol may only lead. Every character (and the space symbol) is always
/// returned; the multi-character remainder is capped at `seed_size` by count, ties by
/// string. Output is sorted by count descending, then string.
pub fn seed_vocabulary(corpus: &Corpus, cfg: &UnigramTrainConfig) -> Result<Vec<(String, u64)>> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot seed a unigram vocabulary from an empty corpus".into()));
    }
    let space = corpus.space_symbol;
    let isolates = corpus.space_mode.isolates();
    let counts = corpus.pretoken_counts();
    let mut subs: HashMap<&str, u64> = HashMap::new();
    let mut singles: HashMap<char, u64> = HashMap::new();
    for (word, &c) in &counts {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let chars: Vec<char> = word.chars().collect();
        for (start, &ch) in chars.iter().enumerate() {
            *singles.entry(ch).or_insert(0) += c;
            for len in 2..=cfg.max_piece_length.min(chars.len() - start) {
                let last = chars[start + len - 1];
                // Spaces may only lead (attached) or never appear (isolated) in longer pieces.
                if last == space || (isolates && chars[start] == space) {
                    break;
                }
                let s = &word[bounds[start]..bounds[start + len]];
                *subs.entry(s).or_insert(0) += c;
            }
        }
    }
    let alphabet: BTreeSet<char> = corpus.alphabet();
    let mut out: Vec<(String, u64)> = alphabet
        .iter()
        .map(|&ch| (ch.to_string(), singles.get(&ch).copied().unwrap_or(0)))
        .collect();
    let mut multi: Vec<(&str, u64)> = subs.into_iter().collect();
    multi.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    multi.truncate(cfg.seed_size.saturating_sub(out.len()));
    out.extend(multi.into_iter().map(|(s, c)| (s.to_owned(), c)));
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Result of one EM iteration.
#[derive(Debug, Clone)]
pub struct EmStep {
    pub model: UnigramModel,
    /// Corpus log-likelihood under the *input* model.
    pub log_likelihood: f64,
    /// 1, or 0 when the corpus was empty and the model was returned as is.
    pub iterations: usize,
}

fn expectations(trie: &Trie, log_probs: &[f64], words: &[(Vec<char>, u64)]) -> Result<(Vec<f64>, f64)> {
    let n = log_probs.len();
    if words.is_empty() {
        return Ok((vec![0.0; n], 0.0));
    }
    let chunk = words.len().div_ceil(REDUCTION_CHUNKS);
    let partial: Vec<Result<(Vec<f64>, f64)>> = words
        .par_chunks(chunk)
        .map(|chunk| {
            let mut expected = vec![0.0; n];
            let mut ll = 0.0;
            for (chars, count) in chunk {
                let z = lattice::accumulate_marginals(trie, log_probs, chars, *count as f64, &mut expected);
                if z == f64::NEG_INFINITY {
                    let word: String = chars.iter().collect();
                    return Err(Error::Coverage(format!("pretoken {word:?} cannot be segmented")));
                }
                ll += *count as f64 * z;
            }
            Ok((expected, ll))
        })
        .collect();
    let mut expected = vec![0.0; n];
    let mut ll = 0.0;
    for part in partial {
        let (e, l) = part?;
        for (acc, v) in expected.iter_mut().zip(e) {
            *acc += v;
        }
        ll += l;
    }
    Ok((expected, ll))
}

fn em_step_words(model: &UnigramModel, words: &[(Vec<char>, u64)]) -> Result<EmStep> {
    if words.is_empty() {
        return Ok(EmStep { model: model.clone(), log_likelihood: 0.0, iterations: 0 });
    }
    let (expected, ll) = expectations(model.trie(), model.log_probs(), words)?;
    let total: f64 = expected.iter().sum();
    let pieces = model
        .pieces()
        .iter()
        .zip(&expected)
        .map(|((p, _), &e)| {
            let lp = if e > 0.0 { (e / total).ln() } else { f64::NEG_INFINITY };
            (p.clone(), lp)
        })
        .collect();
    let model = UnigramModel::new(pieces, model.mode, model.norm.clone())?;
    Ok(EmStep { model, log_likelihood: ll, iterations: 1 })
}

/// One EM iteration: expected piece counts by forward-backward, then renormalization.
pub fn em_step(model: &UnigramModel, corpus: &Corpus) -> Result<EmStep> {
    em_step_words(model, &corpus_words(corpus))
}

/// Log marginal likelihood of the corpus, summed over all segmentations of each pretoken.
pub fn corpus_log_likelihood(model: &UnigramModel, corpus: &Corpus) -> Result<f64> {
    Ok(expectations(model.trie(), model.log_probs(), &corpus_words(corpus))?.1)
}

fn is_protected(piece: &str) -> bool {
    piece.chars().nth(1).is_none()
}

fn prune_words(model: &UnigramModel, words: &[(Vec<char>, u64)], target_size: usize, shrink: f64) -> Result<UnigramModel> {
    let target_pieces = target_size.saturating_sub(NUM_SPECIALS);
    let current = model.len();
    if current <= target_pieces {
        return Ok(model.clone());
    }
    let keep = target_pieces.max((current as f64 * shrink).floor() as usize);
    let (trie, log_probs) = (model.trie(), model.log_probs());

    let chunk = words.len().div_ceil(REDUCTION_CHUNKS).max(1);
    let freq: Vec<u64> = words
        .par_chunks(chunk)
        .map(|chunk| {
            let mut f = vec![0u64; current];
            for (chars, count) in chunk {
                if let Some((_, path)) = lattice::viterbi(trie, log_probs, chars, None) {
                    for seg in path {
                        f[seg.piece] += count;
                    }
                }
            }
            f
        })
        .reduce(|| vec![0u64; current], |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        });
    let sum: f64 = freq.iter().map(|&f| f as f64).sum();

    let mut candidates: Vec<(f64, usize)> = model
        .pieces()
        .par_iter()
        .enumerate()
        .filter(|(_, (p, _))| !is_protected(p))
        .map(|(i, (p, _))| {
            let fi = freq[i] as f64;
            if fi == 0.0 {
                return (0.0, i);
            }
            let chars: Vec<char> = p.chars().collect();
            let (_, alt) = lattice::viterbi(trie, log_probs, &chars, Some(i))
                .expect("characters are never pruned");
            // Occurrences of piece i are re-segmented into its best alternative.
            let logsum_alt = (sum + fi * (alt.len() as f64 - 1.0)).ln();
            let lp_piece = fi.ln() - sum.ln();
            let lp_alt: f64 = alt
                .iter()
                .map(|s| (freq[s.piece] as f64 + fi).ln() - logsum_alt)
                .sum();
            (fi * (lp_piece - lp_alt), i)
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| model.pieces()[a.1].0.cmp(&model.pieces()[b.1].0))
    });
    let drop_n = current - keep;
    let dropped: BTreeSet<usize> = candidates.iter().take(drop_n).map(|&(_, i)| i).collect();

    let kept: Vec<(String, f64)> = model
        .pieces()
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, p)| p.clone())
        .collect();
    let mass: f64 = kept.iter().map(|(_, lp)| lp.exp()).sum();
    let log_mass = mass.ln();
    let kept = kept
        .into_iter()
        .map(|(p, lp)| {
            let lp = if mass > 0.0 { lp - log_mass } else { lp };
            (p, lp.min(0.0))
        })
        .collect();
    UnigramModel::new(kept, model.mode, model.norm.clone())
}

/// Removes the lowest-loss pieces down to `max(target, shrink × current)`.
///
/// The loss of a piece is approximated from its Viterbi-path frequency: every
/// occurrence is assumed to be replaced by the best segmentation of the piece that does
/// not use it. Single characters, the space symbol included, are never removed.
pub fn prune_vocabulary(model: &UnigramModel, corpus: &Corpus, cfg: &UnigramTrainConfig) -> Result<UnigramModel> {
    prune_words(model, &corpus_words(corpus), cfg.target_size, cfg.shrink_factor)
}

/// Gap below the least likely piece at which an unused character is reinstated.
const CHARACTER_FLOOR_GAP: f64 = 10.0;

/// Gives characters that EM drove to zero probability a small positive one again.
///
/// Once the longer pieces covering such a character are pruned, the character is the only
/// way left to segment those words.
fn floor_characters(model: UnigramModel) -> Result<UnigramModel> {
    let starved = |p: &str, lp: f64| is_protected(p) && lp == f64::NEG_INFINITY;
    if !model.pieces().iter().any(|(p, lp)| starved(p, *lp)) {
        return Ok(model);
    }
    let min_finite = model
        .pieces()
        .iter()
        .map(|(_, lp)| *lp)
        .filter(|lp| lp.is_finite())
        .fold(0.0, f64::min);
    let floor = min_finite - CHARACTER_FLOOR_GAP;
    let mut pieces: Vec<(String, f64)> = model
        .pieces()
        .iter()
        .map(|(p, lp)| (p.clone(), if starved(p, *lp) { floor } else { *lp }))
        .collect();
    let log_mass = pieces.iter().map(|(_, lp)| lp.exp()).sum::<f64>().ln();
    for (_, lp) in pieces.iter_mut() {
        *lp = (*lp - log_mass).min(0.0);
    }
    UnigramModel::new(pieces, model.mode, model.norm.clone())
}

/// Seeds, then alternates EM and pruning until the vocabulary fits the target.
pub fn train_unigram(corpus: &Corpus, cfg: &UnigramTrainConfig, norm: &NormConfig) -> Result<UnigramModel> {
    if corpus.space_symbol != norm.space_symbol {
        return Err(Error::Config("corpus and normalization disagree on the space symbol".into()));
    }
    cfg.validate(corpus)?;
    let seeds = seed_vocabulary(corpus, cfg)?;
    let total: f64 = seeds.iter().map(|(_, c)| (*c).max(1) as f64).sum();
    let pieces = seeds
        .into_iter()
        .map(|(p, c)| (p, ((c.max(1)) as f64 / total).ln()))
        .collect();
    let mut model = UnigramModel::new(pieces, corpus.space_mode, norm.clone())?;
    let words = corpus_words(corpus);
    let target_pieces = cfg.target_size - NUM_SPECIALS;
    loop {
        for _ in 0..cfg.em_iterations_per_round {
            model = em_step_words(&model, &words)?.model;
        }
        model = floor_characters(model)?;
        if model.len() <= target_pieces {
            break;
        }
        model = prune_words(&model, &words, cfg.target_size, cfg.shrink_factor)?;
        log::debug!("unigram pruning: {} pieces", model.len());
    }
    model.sorted()
}
