//! Adapters from published morphology resources to [`MorphRecord`]s.
//!
//! Every adapter yields candidate parses; a shared filter then keeps words whose
//! morphemes concatenate to the surface form and that have exactly one distinct parse.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::Serialize;

use super::{DatasetTag, MorphRecord, MorphemeKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    pub lowercase: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub kept: usize,
    pub dropped_non_concatenative: usize,
    pub dropped_multi_parse: usize,
    pub duplicates: usize,
    pub malformed: usize,
}

struct Candidate {
    word: String,
    morphemes: Vec<String>,
    kinds: Option<Vec<MorphemeKind>>,
}

pub fn ingest_dataset(path: &Path, tag: DatasetTag, opts: IngestOptions) -> Result<(Vec<MorphRecord>, IngestReport)> {
    let file = File::open(path)?;
    parse_dataset(BufReader::new(file), tag, opts)
}

pub fn parse_dataset<R: Read>(mut reader: R, tag: DatasetTag, opts: IngestOptions) -> Result<(Vec<MorphRecord>, IngestReport)> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Format("dataset is not valid UTF-8".into()),
            _ => Error::Io(e),
        })?;
    let mut report = IngestReport::default();
    let (columns, rows) = read_rows(&text, tag)?;
    let mut candidates = Vec::new();
    for fields in &rows {
        let row = Row { fields, columns: &columns };
        let parsed = match tag {
            DatasetTag::Ladec => ladec_row(&row),
            DatasetTag::MorphoLex => morpholex_row(&row),
            DatasetTag::MorphyNet => morphynet_row(&row),
            DatasetTag::DagoBert => dagobert_row(&row),
            DatasetTag::Custom => custom_row(&row),
        };
        match parsed {
            RowResult::Candidate(mut c) => {
                if opts.lowercase {
                    c.word = c.word.to_lowercase();
                    c.morphemes.iter_mut().for_each(|m| *m = m.to_lowercase());
                }
                candidates.push(c);
            }
            RowResult::Skip => {}
            RowResult::Malformed => report.malformed += 1,
        }
    }
    let records = unique_parses(candidates, tag, &mut report);
    report.kept = records.len();
    if report.malformed > 0 {
        log::warn!("{} malformed rows skipped", report.malformed);
    }
    Ok((records, report))
}

/// Field index per logical slot, resolved from the header or by position.
struct Columns(Vec<Option<usize>>);

struct Row<'a> {
    fields: &'a [String],
    columns: &'a Columns,
}

impl Row<'_> {
    fn get(&self, slot: usize) -> Option<&str> {
        let idx = self.columns.0.get(slot).copied().flatten()?;
        self.fields.get(idx).map(|s| s.trim())
    }
}

enum RowResult {
    Candidate(Candidate),
    Skip,
    Malformed,
}

fn read_rows(text: &str, tag: DatasetTag) -> Result<(Columns, Vec<Vec<String>>)> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if tag == DatasetTag::Custom || tag == DatasetTag::MorphyNet || first.contains('\t') {
        b'\t'
    } else {
        b','
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .quoting(delimiter == b',')
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("dataset parse error: {e}")))?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.iter().all(|f| f.trim().is_empty()) || fields[0].trim_start().starts_with('#') {
            continue;
        }
        data.push(fields);
    }
    let slots = header_slots(tag);
    let header: Option<Vec<String>> = data.first().and_then(|f| {
        let lower: Vec<String> = f.iter().map(|s| s.trim().to_lowercase()).collect();
        let is_header = slots.iter().any(|names| names.iter().any(|n| lower.iter().any(|h| h == n)));
        is_header.then_some(lower)
    });
    let columns = match &header {
        Some(h) => Columns(
            slots
                .iter()
                .map(|names| names.iter().find_map(|n| h.iter().position(|x| x == n)))
                .collect(),
        ),
        None => Columns((0..slots.len()).map(Some).collect()),
    };
    if header.is_some() {
        data.remove(0);
    }
    Ok((columns, data))
}

/// Accepted header names for each logical slot, in positional order.
fn header_slots(tag: DatasetTag) -> Vec<&'static [&'static str]> {
    match tag {
        DatasetTag::Ladec => vec![&["stim", "word", "compound"], &["c1"], &["c2"], &["correctparse"]],
        DatasetTag::MorphoLex => vec![&["word"], &["morpholexsegm", "segmentation"]],
        DatasetTag::MorphyNet => vec![&["source"], &["target"], &["source_pos"], &["target_pos"], &["affix"], &["type"]],
        DatasetTag::DagoBert => vec![&["derivative", "word"], &["prefixes"], &["base"], &["suffixes"]],
        DatasetTag::Custom => vec![&["word"], &["morphemes", "segmentation"]],
    }
}

fn required<'a>(row: &'a Row<'_>, slot: usize) -> Option<&'a str> {
    row.get(slot).filter(|s| !s.is_empty())
}

fn ladec_row(r: &Row<'_>) -> RowResult {
    let (Some(word), Some(c1), Some(c2)) = (required(r, 0), required(r, 1), required(r, 2)) else {
        return RowResult::Malformed;
    };
    if let Some(parse) = r.get(3).filter(|s| !s.is_empty()) {
        let accepted = matches!(parse.to_ascii_lowercase().as_str(), "yes" | "1" | "true");
        if !accepted {
            return RowResult::Skip;
        }
    }
    RowResult::Candidate(Candidate {
        word: word.to_string(),
        morphemes: vec![c1.to_string(), c2.to_string()],
        kinds: Some(vec![MorphemeKind::Root, MorphemeKind::Root]),
    })
}

/// Parses bracketed segmentations such as `{<un<(beat)>able>}`.
///
/// `<x<` is a prefix, `(x)` a root and `>x>` a suffix; braces only group.
pub(crate) fn parse_morpholex_segmentation(segm: &str) -> Option<(Vec<String>, Vec<MorphemeKind>)> {
    let mut morphemes = Vec::new();
    let mut kinds = Vec::new();
    let mut chars = segm.chars();
    while let Some(c) = chars.next() {
        let (close, kind) = match c {
            '<' => ('<', MorphemeKind::Prefix),
            '(' => (')', MorphemeKind::Root),
            '>' => ('>', MorphemeKind::Suffix),
            '{' | '}' => continue,
            c if c.is_whitespace() => continue,
            _ => return None,
        };
        let mut m = String::new();
        loop {
            match chars.next() {
                Some(d) if d == close => break,
                Some('<' | '>' | '(' | ')' | '{' | '}') | None => return None,
                Some(d) => m.push(d),
            }
        }
        if m.is_empty() {
            return None;
        }
        morphemes.push(m);
        kinds.push(kind);
    }
    (!morphemes.is_empty()).then_some((morphemes, kinds))
}

fn morpholex_row(r: &Row<'_>) -> RowResult {
    let (Some(word), Some(segm)) = (required(r, 0), required(r, 1)) else {
        return RowResult::Malformed;
    };
    match parse_morpholex_segmentation(segm) {
        Some((morphemes, kinds)) => RowResult::Candidate(Candidate {
            word: word.to_string(),
            morphemes,
            kinds: Some(kinds),
        }),
        None => RowResult::Malformed,
    }
}

fn morphynet_row(r: &Row<'_>) -> RowResult {
    let (Some(source), Some(target), Some(affix), Some(kind)) =
        (required(r, 0), required(r, 1), required(r, 4), required(r, 5))
    else {
        return RowResult::Malformed;
    };
    let (morphemes, kinds) = match kind.to_ascii_lowercase().as_str() {
        "prefix" => (vec![affix, source], vec![MorphemeKind::Prefix, MorphemeKind::Root]),
        "suffix" => (vec![source, affix], vec![MorphemeKind::Root, MorphemeKind::Suffix]),
        _ => return RowResult::Malformed,
    };
    RowResult::Candidate(Candidate {
        word: target.to_string(),
        morphemes: morphemes.into_iter().map(str::to_string).collect(),
        kinds: Some(kinds),
    })
}

fn split_affixes(field: Option<&str>) -> Vec<String> {
    field
        .unwrap_or("")
        .split(['_', ';', '+', ' ', '|'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn dagobert_row(r: &Row<'_>) -> RowResult {
    let (Some(word), Some(base)) = (required(r, 0), required(r, 2)) else {
        return RowResult::Malformed;
    };
    let prefixes = split_affixes(r.get(1));
    let suffixes = split_affixes(r.get(3));
    let mut kinds = vec![MorphemeKind::Prefix; prefixes.len()];
    kinds.push(MorphemeKind::Root);
    kinds.extend(std::iter::repeat_n(MorphemeKind::Suffix, suffixes.len()));
    let mut morphemes = prefixes;
    morphemes.push(base.to_string());
    morphemes.extend(suffixes);
    RowResult::Candidate(Candidate { word: word.to_string(), morphemes, kinds: Some(kinds) })
}

fn custom_row(r: &Row<'_>) -> RowResult {
    let (Some(word), Some(segm)) = (required(r, 0), required(r, 1)) else {
        return RowResult::Malformed;
    };
    RowResult::Candidate(Candidate {
        word: word.to_string(),
        morphemes: segm.split_whitespace().map(str::to_string).collect(),
        kinds: None,
    })
}

fn unique_parses(candidates: Vec<Candidate>, tag: DatasetTag, report: &mut IngestReport) -> Vec<MorphRecord> {
    // Distinct parses per word, in first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut parses: HashMap<String, Vec<Candidate>> = HashMap::new();
    for c in candidates {
        let concatenative = !c.morphemes.is_empty()
            && c.morphemes.iter().all(|m| !m.is_empty())
            && c.morphemes.concat() == c.word
            && !c.word.chars().any(char::is_whitespace);
        if !concatenative {
            report.dropped_non_concatenative += 1;
            continue;
        }
        let entry = parses.entry(c.word.clone()).or_insert_with(|| {
            order.push(c.word.clone());
            Vec::new()
        });
        if entry.iter().any(|e| e.morphemes == c.morphemes) {
            report.duplicates += 1;
        } else {
            entry.push(c);
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for word in order {
        let mut list = parses.remove(&word).expect("every ordered word has parses");
        if list.len() > 1 {
            report.dropped_multi_parse += list.len();
            continue;
        }
        let c = list.pop().expect("one parse");
        out.push(MorphRecord { word: c.word, gold_morphemes: c.morphemes, source: tag, kinds: c.kinds });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, tag: DatasetTag) -> (Vec<MorphRecord>, IngestReport) {
        parse_dataset(text.as_bytes(), tag, IngestOptions::default()).unwrap()
    }

    #[test]
    fn ladec_positional_rows() {
        let (recs, rep) = parse("doghouse, dog, house\nbluebird,blue,bird\n", DatasetTag::Ladec);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].gold_morphemes, ["dog", "house"]);
        assert_eq!(rep.kept, 2);
    }

    #[test]
    fn ladec_header_and_parse_flag() {
        let text = "c1,c2,stim,correctParse\nbutter,fly,butterfly,yes\nbutt,erfly,butterfly,no\n";
        let (recs, _) = parse(text, DatasetTag::Ladec);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].word, "butterfly");
        assert_eq!(recs[0].gold_morphemes, ["butter", "fly"]);
    }

    #[test]
    fn morpholex_segmentations() {
        let (m, k) = parse_morpholex_segmentation("{<un<(beat)>able>}").unwrap();
        assert_eq!(m, ["un", "beat", "able"]);
        assert_eq!(k, [MorphemeKind::Prefix, MorphemeKind::Root, MorphemeKind::Suffix]);
        let (m, _) = parse_morpholex_segmentation("{(hand)}{(book)}").unwrap();
        assert_eq!(m, ["hand", "book"]);
        assert!(parse_morpholex_segmentation("{(hand}").is_none());
        let (recs, rep) = parse("Word,MorphoLexSegm\nunbeatable,{<un<(beat)>able>}\nbad,{(ba\n", DatasetTag::MorphoLex);
        assert_eq!(recs.len(), 1);
        assert_eq!(rep.malformed, 1);
    }

    #[test]
    fn morphynet_rows() {
        let text = "kind\tkindness\tJ\tN\tness\tsuffix\ndo\tredo\tV\tV\tre\tprefix\n";
        let (recs, _) = parse(text, DatasetTag::MorphyNet);
        assert_eq!(recs[0].gold_morphemes, ["kind", "ness"]);
        assert_eq!(recs[1].gold_morphemes, ["re", "do"]);
        assert_eq!(recs[1].kinds.as_ref().unwrap()[0], MorphemeKind::Prefix);
    }

    #[test]
    fn dagobert_rows() {
        let text = "derivative\tprefixes\tbase\tsuffixes\nunkindness\tun\tkind\tness\nrekindle\t\tkindle\t\nreadable\t\tread\table\n";
        let (recs, rep) = parse(text, DatasetTag::DagoBert);
        assert_eq!(recs[0].gold_morphemes, ["un", "kind", "ness"]);
        assert_eq!(recs[1].gold_morphemes, ["read", "able"]);
        assert_eq!(recs[1].kinds.as_ref().unwrap(), &[MorphemeKind::Root, MorphemeKind::Suffix]);
        assert_eq!(rep.dropped_non_concatenative, 1);
    }

    #[test]
    fn filtering_rules() {
        let text = "ability\table ity\nredo\tre do\nredo\tre do\nreader\tread er\nreader\tre ader\n# comment\nfoo\n";
        let (recs, rep) = parse(text, DatasetTag::Custom);
        assert_eq!(recs.iter().map(|r| r.word.as_str()).collect::<Vec<_>>(), ["redo"]);
        assert_eq!(rep.dropped_non_concatenative, 1);
        assert_eq!(rep.duplicates, 1);
        assert_eq!(rep.dropped_multi_parse, 2);
        assert_eq!(rep.malformed, 1);
    }

    #[test]
    fn lowercasing_option() {
        let opts = IngestOptions { lowercase: true };
        let (recs, _) = parse_dataset("Doghouse\tDog house\n".as_bytes(), DatasetTag::Custom, opts).unwrap();
        assert_eq!(recs[0].word, "doghouse");
        assert_eq!(recs[0].gold_morphemes, ["dog", "house"]);
    }
}
