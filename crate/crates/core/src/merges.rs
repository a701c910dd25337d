//! Merge-based vocabulary learning shared by BPE and WordPiece.
//!
//! Both trainers start from the character alphabet and repeatedly fuse one adjacent
//! pair inside pretokens. They differ only in how the pair is chosen: BPE takes the
//! most frequent pair, WordPiece the pair maximizing `count(l,r) / (count(l) * count(r))`.
//! Ties go to the lexicographically smaller concatenation, then the smaller left side.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{Corpus, SpaceMode};
use crate::tokens::NUM_SPECIALS;

/// Pairs occurring fewer times than this are never merged.
pub const MIN_PAIR_COUNT: u64 = 2;

/// Corpus size (in symbols) up to which `Auto` recounts every pair after each merge.
const EXACT_RECOUNT_LIMIT: usize = 4096;

const CHUNK: usize = 2048;

/// How pair statistics are kept up to date between merges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountStrategy {
    #[default]
    Auto,
    /// Full recount after every merge.
    Exact,
    /// Per-word pair deltas for the words touched by a merge.
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    Frequency,
    Likelihood,
}

/// Whether a pair may be merged under the given space mode.
///
/// Isolated: neither side may contain the space symbol. Attached: the right side may
/// not contain it and the left side may only start with it.
pub fn pair_eligible(left: &str, right: &str, mode: SpaceMode, space: char) -> bool {
    if mode.isolates() {
        !left.contains(space) && !right.contains(space)
    } else {
        !right.contains(space) && !left.chars().skip(1).any(|c| c == space)
    }
}

/// Counts eligible adjacent pairs over per-pretoken token sequences.
pub fn count_pairs<S: AsRef<str>>(
    state: &[Vec<S>],
    mode: SpaceMode,
    space: char,
) -> BTreeMap<(String, String), u64> {
    let mut counts = BTreeMap::new();
    for seq in state {
        for w in seq.windows(2) {
            let (l, r) = (w[0].as_ref(), w[1].as_ref());
            if pair_eligible(l, r, mode, space) {
                *counts.entry((l.to_owned(), r.to_owned())).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Output of merge learning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Learned {
    pub alphabet: Vec<char>,
    pub merges: Vec<(String, String)>,
    /// Alphabet followed by each newly created token, in creation order.
    pub tokens: Vec<String>,
}

type Pair = (u32, u32);

struct State {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
    has_space: Vec<bool>,
    inner_space: Vec<bool>,
    words: Vec<Vec<u32>>,
    counts: Vec<u64>,
    mode: SpaceMode,
    space: char,
}

impl State {
    fn new(corpus: &Corpus, alphabet: &[char]) -> State {
        let mut st = State {
            symbols: Vec::new(),
            index: HashMap::new(),
            has_space: Vec::new(),
            inner_space: Vec::new(),
            words: Vec::new(),
            counts: Vec::new(),
            mode: corpus.space_mode,
            space: corpus.space_symbol,
        };
        for c in alphabet {
            st.intern(c.to_string());
        }
        for (word, count) in corpus.pretoken_counts() {
            let ids = word.chars().map(|c| st.index[c.to_string().as_str()]).collect();
            st.words.push(ids);
            st.counts.push(count);
        }
        st
    }

    /// Returns the ID of `s`, and whether it was newly created.
    fn intern(&mut self, s: String) -> (u32, bool) {
        if let Some(&id) = self.index.get(&s) {
            return (id, false);
        }
        let id = self.symbols.len() as u32;
        self.has_space.push(s.contains(self.space));
        self.inner_space.push(s.chars().skip(1).any(|c| c == self.space));
        self.index.insert(s.clone(), id);
        self.symbols.push(s);
        (id, true)
    }

    fn eligible(&self, (a, b): Pair) -> bool {
        let (a, b) = (a as usize, b as usize);
        if self.mode.isolates() {
            !self.has_space[a] && !self.has_space[b]
        } else {
            !self.has_space[b] && !self.inner_space[a]
        }
    }

    fn total_symbols(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    fn count_all(&self) -> (HashMap<Pair, u64>, Vec<u64>) {
        let n_sym = self.symbols.len();
        let partial: Vec<(HashMap<Pair, u64>, Vec<u64>)> = self
            .words
            .par_chunks(CHUNK)
            .zip(self.counts.par_chunks(CHUNK))
            .map(|(words, counts)| {
                let mut pairs = HashMap::new();
                let mut syms = vec![0u64; n_sym];
                for (w, &c) in words.iter().zip(counts) {
                    for &s in w {
                        syms[s as usize] += c;
                    }
                    for p in w.windows(2) {
                        let pair = (p[0], p[1]);
                        if self.eligible(pair) {
                            *pairs.entry(pair).or_insert(0) += c;
                        }
                    }
                }
                (pairs, syms)
            })
            .collect();
        let mut pairs = HashMap::new();
        let mut syms = vec![0u64; n_sym];
        for (p, s) in partial {
            for (k, v) in p {
                *pairs.entry(k).or_insert(0) += v;
            }
            for (acc, v) in syms.iter_mut().zip(s) {
                *acc += v;
            }
        }
        (pairs, syms)
    }

    /// Compares two pairs for selection; `Greater` means `a` is preferred.
    fn prefer(&self, a: Pair, b: Pair, criterion: Criterion, pair_count: impl Fn(Pair) -> u64, sym_count: impl Fn(u32) -> u64) -> Ordering {
        let primary = match criterion {
            Criterion::Frequency => pair_count(a).cmp(&pair_count(b)),
            Criterion::Likelihood => {
                let lhs = pair_count(a) as u128 * sym_count(b.0) as u128 * sym_count(b.1) as u128;
                let rhs = pair_count(b) as u128 * sym_count(a.0) as u128 * sym_count(a.1) as u128;
                lhs.cmp(&rhs)
            }
        };
        primary.then_with(|| self.lexical(b, a))
    }

    /// Lexical order of the concatenations, then of left sides.
    fn lexical(&self, a: Pair, b: Pair) -> Ordering {
        let (al, ar) = (&self.symbols[a.0 as usize], &self.symbols[a.1 as usize]);
        let (bl, br) = (&self.symbols[b.0 as usize], &self.symbols[b.1 as usize]);
        al.chars()
            .chain(ar.chars())
            .cmp(bl.chars().chain(br.chars()))
            .then_with(|| al.cmp(bl))
    }
}

/// Fuses every non-overlapping occurrence of `(a, b)` left to right. Returns the number of fusions.
fn merge_word(word: &mut Vec<u32>, (a, b): Pair, new: u32) -> usize {
    let mut merged = 0;
    let mut i = 0;
    let mut out = Vec::with_capacity(word.len());
    while i < word.len() {
        if i + 1 < word.len() && word[i] == a && word[i + 1] == b {
            out.push(new);
            i += 2;
            merged += 1;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    if merged > 0 {
        *word = out;
    }
    merged
}

#[derive(PartialEq, Eq)]
struct HeapEntry {
    count: u64,
    concat: String,
    left: String,
    pair: Pair,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.concat.cmp(&self.concat))
            .then_with(|| other.left.cmp(&self.left))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Smallest vocabulary size a merge trainer accepts for this corpus.
pub(crate) fn minimum_size(corpus: &Corpus) -> usize {
    NUM_SPECIALS + corpus.alphabet().len()
}

pub(crate) fn learn_merges(
    corpus: &Corpus,
    target_size: usize,
    criterion: Criterion,
    strategy: CountStrategy,
) -> Result<Learned> {
    let alphabet: Vec<char> = corpus.alphabet().into_iter().collect();
    let min = NUM_SPECIALS + alphabet.len();
    if target_size < min {
        return Err(Error::Config(format!(
            "vocabulary size {target_size} is below the minimum {min} ({} specials + {} characters)",
            NUM_SPECIALS,
            alphabet.len()
        )));
    }
    let mut st = State::new(corpus, &alphabet);
    let exact = match strategy {
        CountStrategy::Exact => true,
        CountStrategy::Incremental => false,
        CountStrategy::Auto => st.total_symbols() <= EXACT_RECOUNT_LIMIT,
    };
    let mut learned = Learned {
        alphabet: alphabet.clone(),
        merges: Vec::new(),
        tokens: alphabet.iter().map(|c| c.to_string()).collect(),
    };
    let budget = target_size - NUM_SPECIALS;
    if exact {
        learn_exact(&mut st, &mut learned, budget, criterion);
    } else {
        learn_incremental(&mut st, &mut learned, budget, criterion);
    }
    Ok(learned)
}

fn record(st: &mut State, learned: &mut Learned, pair: Pair) -> u32 {
    let left = st.symbols[pair.0 as usize].clone();
    let right = st.symbols[pair.1 as usize].clone();
    let (id, fresh) = st.intern(format!("{left}{right}"));
    if fresh {
        learned.tokens.push(st.symbols[id as usize].clone());
    }
    learned.merges.push((left, right));
    id
}

fn learn_exact(st: &mut State, learned: &mut Learned, budget: usize, criterion: Criterion) {
    while learned.tokens.len() < budget {
        let (pairs, syms) = st.count_all();
        let best = pairs
            .iter()
            .filter(|(_, &c)| c >= MIN_PAIR_COUNT)
            .map(|(&p, _)| p)
            .max_by(|&a, &b| st.prefer(a, b, criterion, |p| pairs[&p], |s| syms[s as usize]));
        let Some(pair) = best else { break };
        let new = record(st, learned, pair);
        for w in st.words.iter_mut() {
            merge_word(w, pair, new);
        }
    }
}

fn learn_incremental(st: &mut State, learned: &mut Learned, budget: usize, criterion: Criterion) {
    let (initial, syms) = st.count_all();
    let mut pair_counts: HashMap<Pair, u64> = initial;
    let mut sym_counts: Vec<u64> = syms;
    let mut where_: HashMap<Pair, Vec<usize>> = HashMap::new();
    for (i, w) in st.words.iter().enumerate() {
        for p in w.windows(2) {
            let pair = (p[0], p[1]);
            if st.eligible(pair) {
                let list = where_.entry(pair).or_default();
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
    }
    let mut heap = BinaryHeap::new();
    let entry = |st: &State, pair: Pair, count: u64| HeapEntry {
        count,
        concat: format!("{}{}", st.symbols[pair.0 as usize], st.symbols[pair.1 as usize]),
        left: st.symbols[pair.0 as usize].clone(),
        pair,
    };
    if criterion == Criterion::Frequency {
        for (&pair, &count) in &pair_counts {
            heap.push(entry(st, pair, count));
        }
    }

    while learned.tokens.len() < budget {
        let best = match criterion {
            Criterion::Frequency => loop {
                let Some(top) = heap.pop() else { break None };
                let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
                if current == top.count {
                    break (current >= MIN_PAIR_COUNT).then_some(top.pair);
                }
            },
            Criterion::Likelihood => pair_counts
                .iter()
                .filter(|(_, &c)| c >= MIN_PAIR_COUNT)
                .map(|(&p, _)| p)
                .max_by(|&a, &b| {
                    st.prefer(a, b, criterion, |p| pair_counts[&p], |s| sym_counts[s as usize])
                }),
        };
        let Some(pair) = best else { break };
        let new = record(st, learned, pair);
        if sym_counts.len() < st.symbols.len() {
            sym_counts.resize(st.symbols.len(), 0);
        }

        let mut touched = where_.remove(&pair).unwrap_or_default();
        touched.sort_unstable();
        touched.dedup();
        let mut changed: HashSet<Pair> = HashSet::new();
        for wi in touched {
            let count = st.counts[wi];
            let before = st.words[wi].clone();
            let mut after = before.clone();
            let fused = merge_word(&mut after, pair, new) as u64;
            if fused == 0 {
                continue;
            }
            sym_counts[pair.0 as usize] -= fused * count;
            sym_counts[pair.1 as usize] -= fused * count;
            sym_counts[new as usize] += fused * count;
            for p in before.windows(2) {
                let pr = (p[0], p[1]);
                if st.eligible(pr) {
                    let c = pair_counts.get_mut(&pr).expect("pair counted");
                    *c -= count;
                    changed.insert(pr);
                }
            }
            for p in after.windows(2) {
                let pr = (p[0], p[1]);
                if st.eligible(pr) {
                    *pair_counts.entry(pr).or_insert(0) += count;
                    changed.insert(pr);
                    if pr != pair {
                        let list = where_.entry(pr).or_default();
                        if list.last() != Some(&wi) {
                            list.push(wi);
                        }
                    }
                }
            }
            st.words[wi] = after;
        }
        let mut changed: Vec<Pair> = changed.into_iter().collect();
        changed.sort_unstable();
        for pr in changed {
            let c = pair_counts[&pr];
            if c == 0 {
                pair_counts.remove(&pr);
            } else if criterion == Criterion::Frequency {
                heap.push(entry(st, pr, c));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::NormConfig;

    #[test]
    fn count_pairs_examples() {
        let attached = vec![vec!["▁", "a", "a"], vec!["▁", "a", "a"]];
        let counts = count_pairs(&attached, SpaceMode::Attached, '▁');
        let expected: BTreeMap<_, _> = [
            (("▁".to_string(), "a".to_string()), 2),
            (("a".to_string(), "a".to_string()), 2),
        ]
        .into_iter()
        .collect();
        assert_eq!(counts, expected);

        let isolated = vec![vec!["a", "b"], vec!["▁"], vec!["a", "b"]];
        let counts = count_pairs(&isolated, SpaceMode::Isolated, '▁');
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[&("a".to_string(), "b".to_string())], 2);

        let empty: Vec<Vec<&str>> = Vec::new();
        assert!(count_pairs(&empty, SpaceMode::Isolated, '▁').is_empty());
    }

    #[test]
    fn attached_rejects_space_on_right() {
        assert!(!pair_eligible("a", "▁b", SpaceMode::Attached, '▁'));
        assert!(pair_eligible("▁a", "b", SpaceMode::Attached, '▁'));
        assert!(!pair_eligible("▁", "a", SpaceMode::Isolated, '▁'));
    }

    #[test]
    fn overlapping_runs_merge_left_to_right() {
        let mut w = vec![1, 1, 1];
        assert_eq!(merge_word(&mut w, (1, 1), 9), 1);
        assert_eq!(w, vec![9, 1]);
        let mut w = vec![1, 1, 1, 1];
        assert_eq!(merge_word(&mut w, (1, 1), 9), 2);
        assert_eq!(w, vec![9, 9]);
    }

    #[test]
    fn exact_and_incremental_agree() {
        let text = [
            "the cat sat on the mat",
            "the bat ate the hat that sat",
            "aaaa aaa aa banana bandana",
            "that hat, this hat; those hats",
        ];
        for mode in [SpaceMode::Attached, SpaceMode::Isolated] {
            let corpus = Corpus::from_lines(&text, mode, &NormConfig::default()).unwrap();
            for criterion in [Criterion::Frequency, Criterion::Likelihood] {
                let target = minimum_size(&corpus) + 40;
                let a = learn_merges(&corpus, target, criterion, CountStrategy::Exact).unwrap();
                let b = learn_merges(&corpus, target, criterion, CountStrategy::Incremental).unwrap();
                assert_eq!(a, b, "{mode:?} {criterion:?}");
            }
        }
    }
}
