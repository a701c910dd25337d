//! Morphological boundary evaluation.
//!
//! A segmentation of a word is reduced to the set of character offsets where it splits.
//! Predicted offsets are compared with gold ones: a shared offset is a true positive, a
//! predicted-only offset a false positive, a gold-only offset a false negative. Counts
//! are summed over a dataset before precision, recall and F1 are computed.

mod datasets;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::{Tokenisation, Tokenizer};
use crate::vocabstats::AffixLexicon;

pub use datasets::{ingest_dataset, parse_dataset, IngestOptions, IngestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Ladec,
    MorphoLex,
    MorphyNet,
    DagoBert,
    Custom,
}

impl FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ladec" => Ok(DatasetTag::Ladec),
            "morpholex" => Ok(DatasetTag::MorphoLex),
            "morphynet" => Ok(DatasetTag::MorphyNet),
            "dagobert" => Ok(DatasetTag::DagoBert),
            "custom" => Ok(DatasetTag::Custom),
            other => Err(Error::Format(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetTag::Ladec => "ladec",
            DatasetTag::MorphoLex => "morpholex",
            DatasetTag::MorphyNet => "morphynet",
            DatasetTag::DagoBert => "dagobert",
            DatasetTag::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MorphemeKind {
    Prefix,
    Root,
    Suffix,
}

/// A word with a concatenative gold segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphRecord {
    pub word: String,
    pub gold_morphemes: Vec<String>,
    pub source: DatasetTag,
    /// Per-morpheme affix annotation, when the dataset provides one.
    pub kinds: Option<Vec<MorphemeKind>>,
}

impl MorphRecord {
    /// Fails unless the morphemes are non-empty and concatenate to the word.
    pub fn new(word: impl Into<String>, gold_morphemes: Vec<String>, source: DatasetTag) -> Result<Self> {
        let rec = MorphRecord { word: word.into(), gold_morphemes, source, kinds: None };
        if !rec.is_concatenative() {
            return Err(Error::Format(format!(
                "morphemes {:?} do not concatenate to {:?}",
                rec.gold_morphemes, rec.word
            )));
        }
        Ok(rec)
    }

    pub fn with_kinds(mut self, kinds: Vec<MorphemeKind>) -> Self {
        debug_assert_eq!(kinds.len(), self.gold_morphemes.len());
        self.kinds = Some(kinds);
        self
    }

    pub fn is_concatenative(&self) -> bool {
        !self.gold_morphemes.is_empty()
            && self.gold_morphemes.iter().all(|m| !m.is_empty())
            && self.gold_morphemes.concat() == self.word
    }

    pub fn gold_boundaries(&self) -> BoundarySet {
        boundaries(&self.gold_morphemes)
    }
}

/// Split offsets (in characters) strictly inside a word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BoundarySet(pub BTreeSet<usize>);

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cuts `word` at every offset.
    pub fn split(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Vec::with_capacity(self.0.len() + 1);
        let mut prev = 0;
        for &b in self.0.iter().chain(std::iter::once(&chars.len())) {
            out.push(chars[prev..b].iter().collect());
            prev = b;
        }
        out
    }
}

/// Cumulative-length split points of a segmentation, excluding 0 and the word length.
pub fn boundaries<S: AsRef<str>>(segments: &[S]) -> BoundarySet {
    let total: usize = segments.iter().map(|s| s.as_ref().chars().count()).sum();
    let mut set = BTreeSet::new();
    let mut pos = 0;
    for s in segments {
        pos += s.as_ref().chars().count();
        if pos > 0 && pos < total {
            set.insert(pos);
        }
    }
    BoundarySet(set)
}

/// Token surfaces with every space symbol removed, empty results dropped.
///
/// Handles both isolated output (standalone spaces) and attached output (leading spaces).
pub fn word_segments(tokens: &Tokenisation, space: char) -> Vec<String> {
    tokens
        .tokens
        .iter()
        .map(|t| t.text.chars().filter(|&c| c != space).collect::<String>())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl std::ops::Add for BoundaryCounts {
    type Output = BoundaryCounts;

    fn add(self, o: BoundaryCounts) -> BoundaryCounts {
        BoundaryCounts {
            true_positives: self.true_positives + o.true_positives,
            false_positives: self.false_positives + o.false_positives,
            false_negatives: self.false_negatives + o.false_negatives,
        }
    }
}

impl BoundaryCounts {
    /// Precision, recall, F1 as percentages; a zero denominator gives 0.
    pub fn metrics(&self) -> (f64, f64, f64) {
        let (tp, fp, fn_) = (self.true_positives as f64, self.false_positives as f64, self.false_negatives as f64);
        let p = if tp + fp > 0.0 { 100.0 * tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { 100.0 * tp / (tp + fn_) } else { 0.0 };
        (p, r, harmonic_mean(p, r))
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn score_record(gold: &BoundarySet, pred: &BoundarySet) -> BoundaryCounts {
    let tp = gold.0.intersection(&pred.0).count() as u64;
    BoundaryCounts {
        true_positives: tp,
        false_positives: pred.len() as u64 - tp,
        false_negatives: gold.len() as u64 - tp,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum counts over all records, then compute metrics.
    #[default]
    Micro,
    /// Average per-record metrics over records where they are defined.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Non-space tokens per word.
    pub mean_sequence_length: f64,
    pub n_records: usize,
    pub aggregation: Aggregation,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl EvalReport {
    /// Precision, recall, F1 rounded to one decimal.
    pub fn rounded(&self) -> (f64, f64, f64) {
        (round1(self.precision), round1(self.recall), round1(self.f1))
    }

    pub const TSV_HEADER: &'static str = "records\tseq_length\tprecision\trecall\tf1\ttp\tfp\tfn";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.2}\t{:.1}\t{:.1}\t{:.1}\t{}\t{}\t{}",
            self.n_records,
            self.mean_sequence_length,
            self.precision,
            self.recall,
            self.f1,
            self.true_positives,
            self.false_positives,
            self.false_negatives
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records:          {}", self.n_records)?;
        writeln!(f, "seq. length:      {:.2}", self.mean_sequence_length)?;
        writeln!(f, "precision:        {:.1}", self.precision)?;
        writeln!(f, "recall:           {:.1}", self.recall)?;
        writeln!(f, "F1:               {:.1}", self.f1)?;
        write!(
            f,
            "tp / fp / fn:     {} / {} / {}",
            self.true_positives, self.false_positives, self.false_negatives
        )
    }
}

/// Scores one word: returns boundary counts and the number of non-space tokens.
pub fn score_word(tokenizer: &dyn Tokenizer, record: &MorphRecord) -> Result<(BoundaryCounts, usize)> {
    let tokens = tokenizer.tokenize(&record.word)?;
    let segments = word_segments(&tokens, tokenizer.space_symbol());
    if segments.concat() != record.word {
        return Err(Error::Format(format!(
            "tokenizer output {:?} does not reproduce {:?}",
            segments, record.word
        )));
    }
    Ok((score_record(&record.gold_boundaries(), &boundaries(&segments)), segments.len()))
}

/// Tokenizes each word in isolation and aggregates boundary scores.
pub fn evaluate(tokenizer: &dyn Tokenizer, records: &[MorphRecord], aggregation: Aggregation) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let scored: Vec<(BoundaryCounts, usize)> = records
        .par_iter()
        .map(|r| score_word(tokenizer, r))
        .collect::<Result<_>>()?;
    let total = scored.iter().fold(BoundaryCounts::default(), |acc, (c, _)| acc + *c);
    let n_tokens: usize = scored.iter().map(|(_, n)| n).sum();
    let (precision, recall, f1) = match aggregation {
        Aggregation::Micro => total.metrics(),
        Aggregation::Macro => {
            let mean = |vals: Vec<f64>| {
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            };
            let ps = scored
                .iter()
                .filter(|(c, _)| c.true_positives + c.false_positives > 0)
                .map(|(c, _)| c.metrics().0)
                .collect();
            let rs = scored
                .iter()
                .filter(|(c, _)| c.true_positives + c.false_negatives > 0)
                .map(|(c, _)| c.metrics().1)
                .collect();
            let fs = scored
                .iter()
                .filter(|(c, _)| c.true_positives + c.false_positives + c.false_negatives > 0)
                .map(|(c, _)| c.metrics().2)
                .collect();
            (mean(ps), mean(rs), mean(fs))
        }
    };
    Ok(EvalReport {
        true_positives: total.true_positives,
        false_positives: total.false_positives,
        false_negatives: total.false_negatives,
        precision,
        recall,
        f1,
        mean_sequence_length: n_tokens as f64 / records.len() as f64,
        n_records: records.len(),
        aggregation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffixSubset {
    Prefix,
    Suffix,
}

impl FromStr for AffixSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prefix" | "prefix-only" => Ok(AffixSubset::Prefix),
            "suffix" | "suffix-only" => Ok(AffixSubset::Suffix),
            other => Err(Error::Config(format!("unknown affix subset {other:?}"))),
        }
    }
}

/// Whether a record carries at least one prefix / suffix.
///
/// Uses the dataset's own annotation when present. Otherwise leading morphemes found in
/// the lexicon's prefixes and trailing ones found in its suffixes count, always leaving
/// at least one morpheme as the base.
pub fn affix_profile(record: &MorphRecord, lexicon: Option<&AffixLexicon>) -> (bool, bool) {
    if let Some(kinds) = &record.kinds {
        return (
            kinds.contains(&MorphemeKind::Prefix),
            kinds.contains(&MorphemeKind::Suffix),
        );
    }
    let Some(lex) = lexicon else { return (false, false) };
    let m = &record.gold_morphemes;
    let n = m.len();
    if n < 2 {
        return (false, false);
    }
    let prefixes = m[..n - 1].iter().take_while(|x| lex.prefixes.contains(x.as_str())).count();
    let suffixes = m[prefixes + 1..]
        .iter()
        .rev()
        .take_while(|x| lex.suffixes.contains(x.as_str()))
        .count();
    (prefixes > 0, suffixes > 0)
}

/// Records with at least one affix of the requested kind and none of the other.
pub fn filter_affix_subset(records: &[MorphRecord], lexicon: Option<&AffixLexicon>, which: AffixSubset) -> Vec<MorphRecord> {
    records
        .iter()
        .filter(|r| {
            let (p, s) = affix_profile(r, lexicon);
            match which {
                AffixSubset::Prefix => p && !s,
                AffixSubset::Suffix => s && !p,
            }
        })
        .cloned()
        .collect()
}
