//! Independent reference implementations and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use spacetok::bpe::BpeModel;
use spacetok::modelfile::{model_to_string, AnyModel};
use spacetok::textnorm::{Corpus, NormConfig, SpaceMode};

pub const SPACE: char = '\u{2581}';
pub const NUM_SPECIALS: usize = 5;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn test_data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Whether a pair may merge, written out from the mode definitions.
fn may_merge(left: &str, right: &str, mode: SpaceMode) -> bool {
    let left_spaces: Vec<usize> = left.char_indices().filter(|(_, c)| *c == SPACE).map(|(i, _)| i).collect();
    let right_has_space = right.contains(SPACE);
    match mode {
        SpaceMode::Attached => !right_has_space && left_spaces.iter().all(|&i| i == 0),
        _ => left_spaces.is_empty() && !right_has_space,
    }
}

/// Straightforward BPE: every pretoken occurrence is kept separately, every pair is
/// recounted from scratch each round, and the winner is the highest count with ties
/// broken by the smaller concatenation and then the smaller left side.
///
/// Returns the alphabet and the ordered merge list.
pub fn brute_force_bpe(sentences: &[Vec<String>], mode: SpaceMode, target: usize) -> (Vec<char>, Vec<(String, String)>) {
    let mut words: Vec<Vec<String>> = sentences
        .iter()
        .flatten()
        .map(|w| w.chars().map(|c| c.to_string()).collect())
        .collect();
    let mut alphabet: BTreeSet<char> = sentences.iter().flatten().flat_map(|w| w.chars()).collect();
    alphabet.insert(SPACE);
    let mut vocab: BTreeSet<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let mut merges = Vec::new();
    while NUM_SPECIALS + vocab.len() < target {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for w in &words {
            for i in 0..w.len().saturating_sub(1) {
                if may_merge(&w[i], &w[i + 1], mode) {
                    *counts.entry((w[i].clone(), w[i + 1].clone())).or_default() += 1;
                }
            }
        }
        let mut best: Option<(&(String, String), u64)> = None;
        for (pair, &count) in &counts {
            if count < 2 {
                continue;
            }
            best = match best {
                None => Some((pair, count)),
                Some((b, bc)) => {
                    let key = |p: &(String, String)| (format!("{}{}", p.0, p.1), p.0.clone());
                    if count > bc || (count == bc && key(pair) < key(b)) {
                        Some((pair, count))
                    } else {
                        Some((b, bc))
                    }
                }
            };
        }
        let Some(((l, r), _)) = best else { break };
        let (l, r) = (l.clone(), r.clone());
        let joined = format!("{l}{r}");
        for w in words.iter_mut() {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(joined.clone());
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
        vocab.insert(joined);
        merges.push((l, r));
    }
    (alphabet.into_iter().collect(), merges)
}

/// All segmentations of `word` into known pieces, best first: highest summed
/// log-probability, then fewest pieces, then the longest first piece, second piece and so on.
pub fn exhaustive_best(pieces: &BTreeMap<String, f64>, word: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let mut best: Option<(f64, Vec<String>)> = None;
    // Each subset of the n-1 inner positions is one segmentation.
    for mask in 0u32..(1u32 << n.saturating_sub(1)) {
        let mut segs = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || mask & (1 << (i - 1)) != 0 {
                segs.push(chars[start..i].iter().collect::<String>());
                start = i;
            }
        }
        let Some(score) = segs.iter().map(|s| pieces.get(s).copied()).sum::<Option<f64>>() else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bs, bsegs)) => {
                if score != *bs {
                    score > *bs
                } else if segs.len() != bsegs.len() {
                    segs.len() < bsegs.len()
                } else {
                    let lens = |v: &Vec<String>| v.iter().map(|s| s.chars().count()).collect::<Vec<_>>();
                    lens(&segs) > lens(bsegs)
                }
            }
        };
        if better {
            best = Some((score, segs));
        }
    }
    best.map(|(_, s)| s)
}

/// One line of mixed-script text without the space symbol or line breaks.
pub fn fuzz_line(rng: &mut ChaCha8Rng) -> String {
    const POOLS: &[&[char]] = &[
        &['a', 'b', 'e', 'n', 's', 't', 'x', 'z', 'A', 'Q', '0', '7', '.', ',', '!', '-', '\''],
        &[' ', ' ', ' ', '\t', '\u{00a0}', '\u{3000}', '\u{2003}', '\r'],
        &['é', 'ß', 'ø', 'Ω', 'ж', 'я', 'ي', 'א', 'ก', 'क'],
        &['中', '文', '字', 'の', 'カ', '한'],
        &['😀', '🚀', '👍', '\u{1F3FD}'],
        &['\u{0301}', '\u{0308}', '\u{200d}', '\u{fe0f}'],
        &['\u{2580}', '\u{2582}', '_', '\u{FF21}', '\u{FB01}'],
    ];
    let len = rng.gen_range(0..40);
    (0..len)
        .map(|_| {
            let pool = POOLS[rng.gen_range(0..POOLS.len())];
            *pool.choose(rng).unwrap()
        })
        .collect()
}

/// A few short lines over a small random alphabet, at most `max_chars` characters in all.
pub fn random_small_corpus(rng: &mut ChaCha8Rng, max_chars: usize) -> Vec<String> {
    let letters: Vec<char> = "abcdefgh".chars().take(rng.gen_range(2..=6)).collect();
    let mut lines = Vec::new();
    let mut total = 0;
    let n_lines = rng.gen_range(1..=6);
    for _ in 0..n_lines {
        let n_words = rng.gen_range(1..=6);
        let words: Vec<String> = (0..n_words)
            .map(|_| {
                let len = rng.gen_range(1..=6);
                (0..len).map(|_| *letters.choose(rng).unwrap()).collect()
            })
            .collect();
        let line = words.join(" ");
        let len = line.chars().count();
        if total + len > max_chars {
            break;
        }
        total += len + 1;
        lines.push(line);
    }
    if lines.is_empty() {
        lines.push(letters[0].to_string());
    }
    lines
}

pub fn toy_corpus_lines() -> Vec<String> {
    std::fs::read_to_string(data_path("toy-corpus.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

pub const GOLDEN_VOCAB_SIZE: usize = 300;

/// Model file expected from `train --algorithm bpe --mode isolated --vocab-size 300` on
/// the bundled toy corpus, with the merge list taken from [`brute_force_bpe`].
pub fn golden_bpe_text() -> String {
    let norm = NormConfig::default();
    let corpus = Corpus::from_lines(&toy_corpus_lines(), SpaceMode::Isolated, &norm).unwrap();
    let (alphabet, merges) = brute_force_bpe(&corpus.sentences, SpaceMode::Isolated, GOLDEN_VOCAB_SIZE);
    let model = BpeModel::from_parts(alphabet, merges, SpaceMode::Isolated, norm).unwrap();
    model_to_string(&AnyModel::Bpe(model))
}
