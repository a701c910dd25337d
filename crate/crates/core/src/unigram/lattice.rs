//! Piece lookup and dynamic programs over the segmentation lattice of one pretoken.

use std::collections::HashMap;

#[derive(Debug, Clone, Default)]
struct Node {
    children: HashMap<char, u32>,
    piece: Option<u32>,
}

/// Character trie mapping piece strings to piece indices.
#[derive(Debug, Clone)]
pub(crate) struct Trie {
    nodes: Vec<Node>,
}

impl Trie {
    pub fn new<'a>(pieces: impl IntoIterator<Item = &'a str>) -> Trie {
        let mut trie = Trie { nodes: vec![Node::default()] };
        for (idx, piece) in pieces.into_iter().enumerate() {
            let mut cur = 0usize;
            for c in piece.chars() {
                let next = trie.nodes.len() as u32;
                let child = *trie.nodes[cur].children.entry(c).or_insert(next);
                if child == next {
                    trie.nodes.push(Node::default());
                }
                cur = child as usize;
            }
            trie.nodes[cur].piece = Some(idx as u32);
        }
        trie
    }

    pub fn knows_char(&self, c: char) -> bool {
        self.nodes[0].children.contains_key(&c)
    }

    /// Calls `f(end, piece)` for every piece that matches `chars[start..end]`, in increasing `end`.
    pub fn for_each_prefix(&self, chars: &[char], start: usize, mut f: impl FnMut(usize, usize)) {
        let mut cur = 0usize;
        for (off, c) in chars[start..].iter().enumerate() {
            match self.nodes[cur].children.get(c) {
                Some(&next) => cur = next as usize,
                None => return,
            }
            if let Some(p) = self.nodes[cur].piece {
                f(start + off + 1, p as usize);
            }
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Forward-backward over all segmentations of `chars`.
///
/// Adds `weight * posterior` of each piece occurrence into `expected` and returns the
/// log marginal likelihood, `-inf` when no segmentation exists.
pub(crate) fn accumulate_marginals(
    trie: &Trie,
    log_probs: &[f64],
    chars: &[char],
    weight: f64,
    expected: &mut [f64],
) -> f64 {
    let n = chars.len();
    let mut alpha = vec![f64::NEG_INFINITY; n + 1];
    let mut beta = vec![f64::NEG_INFINITY; n + 1];
    alpha[0] = 0.0;
    beta[n] = 0.0;
    for i in 0..n {
        if alpha[i] == f64::NEG_INFINITY {
            continue;
        }
        let a = alpha[i];
        trie.for_each_prefix(chars, i, |j, p| {
            if log_probs[p] > f64::NEG_INFINITY {
                alpha[j] = log_add(alpha[j], a + log_probs[p]);
            }
        });
    }
    for i in (0..n).rev() {
        let mut acc = f64::NEG_INFINITY;
        trie.for_each_prefix(chars, i, |j, p| {
            if log_probs[p] > f64::NEG_INFINITY {
                acc = log_add(acc, log_probs[p] + beta[j]);
            }
        });
        beta[i] = acc;
    }
    let z = alpha[n];
    if z == f64::NEG_INFINITY {
        return z;
    }
    for (i, &a) in alpha[..n].iter().enumerate() {
        if a == f64::NEG_INFINITY {
            continue;
        }
        trie.for_each_prefix(chars, i, |j, p| {
            if log_probs[p] > f64::NEG_INFINITY && beta[j] > f64::NEG_INFINITY {
                expected[p] += weight * (a + log_probs[p] + beta[j] - z).exp();
            }
        });
    }
    z
}

/// One segment of a best path: `chars[start..end]` is piece `piece`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Segment {
    pub start: usize,
    pub end: usize,
    pub piece: usize,
}

/// Best segmentation by total log-probability.
///
/// Ties go to fewer pieces, then to the longest leftmost piece. `exclude` removes one
/// piece from consideration. Returns `None` when `chars` cannot be covered.
pub(crate) fn viterbi(
    trie: &Trie,
    log_probs: &[f64],
    chars: &[char],
    exclude: Option<usize>,
) -> Option<(f64, Vec<Segment>)> {
    let n = chars.len();
    // Solved right to left: best[i] covers chars[i..].
    let mut score = vec![f64::NEG_INFINITY; n + 1];
    let mut count = vec![usize::MAX; n + 1];
    let mut choice: Vec<Option<(usize, usize)>> = vec![None; n + 1];
    let mut reachable = vec![false; n + 1];
    score[n] = 0.0;
    count[n] = 0;
    reachable[n] = true;
    let mut ends = Vec::new();
    for i in (0..n).rev() {
        ends.clear();
        trie.for_each_prefix(chars, i, |j, p| {
            if Some(p) != exclude && reachable[j] {
                ends.push((j, p));
            }
        });
        // Longest first, replacing only on strict improvement.
        for &(j, p) in ends.iter().rev() {
            let s = log_probs[p] + score[j];
            let c = count[j] + 1;
            let better = !reachable[i] || s > score[i] || (s == score[i] && c < count[i]);
            if better {
                score[i] = s;
                count[i] = c;
                choice[i] = Some((j, p));
                reachable[i] = true;
            }
        }
    }
    if !reachable[0] {
        return None;
    }
    let mut path = Vec::with_capacity(count[0]);
    let mut i = 0;
    while i < n {
        let (j, p) = choice[i].expect("reachable position has a choice");
        path.push(Segment { start: i, end: j, piece: p });
        i = j;
    }
    Some((score[0], path))
}
