//! Command-line front end: `train`, `tokenize`, `evaluate`, `analyze`, `segment-demo`.
//!
//! Every failure maps to a distinct exit code through [`Error::exit_code`]; clap usage
//! errors exit with 2.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bpe::{train_bpe, BpeTrainConfig, CountStrategy};
use crate::error::{Error, Result};
use crate::modelfile::{load_model, save_model, Algorithm, AnyModel};
use crate::morphoeval::{
    evaluate, filter_affix_subset, ingest_dataset, Aggregation, AffixSubset, DatasetTag, EvalReport,
    IngestOptions, IngestReport,
};
use crate::textnorm::{read_lines, Corpus, NormConfig, SpaceMode, UnicodeForm};
use crate::tokens::Tokenizer;
use crate::unigram::{train_unigram, UnigramTrainConfig};
use crate::vocabstats::{affix_counts, degeneracy, overlap, AffixLexicon};
use crate::wordpiece::{train_wordpiece, WordPieceTrainConfig};

/// Relative input paths that do not exist are looked up under this directory.
pub const DATA_DIR_ENV: &str = "SPACETOK_DATA_DIR";

pub const DEFAULT_VOCAB_SIZE: usize = 16_000;

#[derive(Debug, Parser)]
#[command(name = "spacetok", version, about = "Train, apply and evaluate subword tokenisers")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a text corpus, one sentence per line.
    Train(TrainArgs),
    /// Tokenize lines of text with a trained model.
    Tokenize(TokenizeArgs),
    /// Score a model's word segmentations against gold morpheme boundaries.
    Evaluate(EvaluateArgs),
    /// Vocabulary statistics for one model or a default/modified pair.
    Analyze(AnalyzeArgs),
    /// Segment text with its spaces removed using an isolated unigram model.
    SegmentDemo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus.
    pub corpus: Option<PathBuf>,
    /// Output model file.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bpe, unigram or wordpiece.
    #[arg(short, long)]
    pub algorithm: Option<Algorithm>,
    /// attached, isolated or isolated-no-spaces.
    #[arg(short, long)]
    pub mode: Option<SpaceMode>,
    /// Final vocabulary size, special tokens included.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Character marking word starts (default U+2581)
    #[arg(long)]
    pub space_symbol: Option<char>,
    /// Apply NFKC normalization before tokenization.
    #[arg(long)]
    pub nfkc: bool,
    /// Keep whitespace runs and line-edge whitespace instead of collapsing them.
    #[arg(long)]
    pub keep_whitespace: bool,
    /// Pair counting for bpe and wordpiece: auto, exact or incremental.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Unigram seed vocabulary size.
    #[arg(long)]
    pub seed_size: Option<usize>,
    /// Longest unigram piece, in characters.
    #[arg(long)]
    pub max_piece_length: Option<usize>,
    /// EM iterations between unigram pruning rounds.
    #[arg(long)]
    pub em_iterations: Option<usize>,
    /// Fraction of unigram pieces kept per pruning round.
    #[arg(long)]
    pub shrink_factor: Option<f64>,
    /// JSON training report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    pub model: PathBuf,
    /// Input file; standard input when omitted.
    pub input: Option<PathBuf>,
    /// Print comma-separated token IDs instead of tokens.
    #[arg(long)]
    pub ids: bool,
    /// Drop standalone space tokens from the output.
    #[arg(long)]
    pub no_spaces: bool,
    /// Fail unless the model is of this algorithm.
    #[arg(short, long)]
    pub algorithm: Option<Algorithm>,
    /// Fail unless the model was trained in this mode.
    #[arg(short, long)]
    pub mode: Option<SpaceMode>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub model: PathBuf,
    pub dataset: PathBuf,
    /// ladec, morpholex, morphynet, dagobert or custom.
    #[arg(short, long, default_value = "custom")]
    pub format: DatasetTag,
    /// Restrict to words with only prefixes (prefix) or only suffixes (suffix).
    #[arg(long)]
    pub subset: Option<AffixSubset>,
    /// Affix lexicon for datasets without affix annotations.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Average per-word scores instead of pooling boundary counts.
    #[arg(long = "macro")]
    pub macro_average: bool,
    /// Lowercase words and morphemes while ingesting.
    #[arg(long)]
    pub lowercase: bool,
    /// JSON evaluation report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// One model, or an attached model followed by its isolated counterpart.
    #[arg(required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Affix lexicon; the bundled English list when omitted.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// JSON analysis report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    pub model: PathBuf,
    /// Text to segment; whitespace inside it is ignored.
    #[arg(num_args = 0..)]
    pub text: Vec<String>,
}

/// Training settings as read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub algorithm: Option<Algorithm>,
    pub mode: Option<SpaceMode>,
    pub vocab_size: Option<usize>,
    pub strategy: Option<CountStrategy>,
    pub normalization: Option<NormConfig>,
    pub unigram: Option<UnigramTrainConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub algorithm: Algorithm,
    pub mode: SpaceMode,
    pub requested_vocab_size: usize,
    pub vocab_size: usize,
    pub runtime_seconds: f64,
    pub sentences: usize,
    pub pretokens: usize,
    pub characters: usize,
    /// Tokens produced when the trained model segments its own corpus.
    pub corpus_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateOutput {
    pub ingest: IngestReport,
    pub subset: Option<AffixSubset>,
    pub result: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAnalysis {
    pub path: PathBuf,
    pub algorithm: Algorithm,
    pub mode: SpaceMode,
    pub vocab_size: usize,
    pub degeneracy: f64,
    pub duplicate_pairs: usize,
    pub prefixes: Option<usize>,
    pub suffixes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeOutput {
    pub models: Vec<ModelAnalysis>,
    pub overlap: Option<f64>,
    pub converse_overlap: Option<f64>,
}

/// Resolves an input path, falling back to the data directory for relative paths.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn open_model(path: &Path) -> Result<AnyModel> {
    load_model(&resolve_input(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run_from_args<I, T>(args: I, stdin: &mut (dyn BufRead + Send), stdout: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spacetok: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, stdin: &mut (dyn BufRead + Send), stdout: &mut (dyn Write + Send)) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command, stdin, stdout))
        }
        None => dispatch(cli.command, stdin, stdout),
    }
}

fn dispatch(command: Command, stdin: &mut (dyn BufRead + Send), stdout: &mut (dyn Write + Send)) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(&a, stdout).map(|_| ()),
        Command::Tokenize(a) => cmd_tokenize(&a, stdin, stdout),
        Command::Evaluate(a) => cmd_evaluate(&a, stdout).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&a, stdout).map(|_| ()),
        Command::SegmentDemo(a) => cmd_segment_demo(&a, stdout),
    }
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut (dyn Write + Send)) -> Result<TrainReport> {
    let file_cfg = match &args.config {
        Some(p) => RunConfig::load(&resolve_input(p))?,
        None => RunConfig::default(),
    };
    let corpus_path = args
        .corpus
        .clone()
        .or(file_cfg.corpus)
        .ok_or_else(|| Error::Config("no training corpus given".into()))?;
    let output = args
        .output
        .clone()
        .or(file_cfg.output)
        .ok_or_else(|| Error::Config("no output path given".into()))?;
    let report_path = args.report.clone().or(file_cfg.report);
    let algorithm = args.algorithm.or(file_cfg.algorithm).unwrap_or(Algorithm::Bpe);
    let mode = args.mode.or(file_cfg.mode).unwrap_or(SpaceMode::Attached);
    let vocab_size = args.vocab_size.or(file_cfg.vocab_size).unwrap_or(DEFAULT_VOCAB_SIZE);
    let strategy = match &args.strategy {
        Some(s) => match s.as_str() {
            "auto" => CountStrategy::Auto,
            "exact" => CountStrategy::Exact,
            "incremental" => CountStrategy::Incremental,
            other => return Err(Error::Config(format!("unknown counting strategy {other:?}"))),
        },
        None => file_cfg.strategy.unwrap_or_default(),
    };
    let mut norm = file_cfg.normalization.unwrap_or_default();
    if let Some(c) = args.space_symbol {
        norm.space_symbol = c;
    }
    if norm.space_symbol.is_whitespace() {
        return Err(Error::Config("the space symbol cannot itself be whitespace".into()));
    }
    if args.nfkc {
        norm.unicode_normalization = UnicodeForm::Nfkc;
    }
    if args.keep_whitespace {
        norm.collapse_repeated_whitespace = false;
    }
    let mut ucfg = file_cfg.unigram.unwrap_or_default();
    ucfg.target_size = vocab_size;
    if let Some(v) = args.seed_size {
        ucfg.seed_size = v;
    }
    if let Some(v) = args.max_piece_length {
        ucfg.max_piece_length = v;
    }
    if let Some(v) = args.em_iterations {
        ucfg.em_iterations_per_round = v;
    }
    if let Some(v) = args.shrink_factor {
        ucfg.shrink_factor = v;
    }

    let reader = BufReader::new(File::open(resolve_input(&corpus_path))?);
    let corpus = Corpus::from_reader(reader, mode, &norm)?;
    log::info!(
        "training {algorithm} ({mode}) on {} sentences, {} pretokens",
        corpus.sentences.len(),
        corpus.num_pretokens()
    );
    let start = Instant::now();
    let model: AnyModel = match algorithm {
        Algorithm::Bpe => train_bpe(&corpus, &BpeTrainConfig { vocab_size, strategy }, &norm)?.into(),
        Algorithm::WordPiece => train_wordpiece(&corpus, &WordPieceTrainConfig { vocab_size, strategy }, &norm)?.into(),
        Algorithm::Unigram => train_unigram(&corpus, &ucfg, &norm)?.into(),
    };
    let runtime_seconds = start.elapsed().as_secs_f64();
    save_model(&model, &output)?;

    let corpus_tokens = corpus
        .sentences
        .iter()
        .map(|s| model.tokenize_pretokens(s).len())
        .sum();
    let report = TrainReport {
        algorithm,
        mode,
        requested_vocab_size: vocab_size,
        vocab_size: model.vocab().len(),
        runtime_seconds,
        sentences: corpus.sentences.len(),
        pretokens: corpus.num_pretokens(),
        characters: corpus.num_chars(),
        corpus_tokens,
    };
    if report.vocab_size < vocab_size {
        log::warn!(
            "corpus supports only {} of the {vocab_size} requested vocabulary entries",
            report.vocab_size
        );
    }
    writeln!(
        stdout,
        "trained {algorithm} ({mode}): vocabulary {} in {:.2}s, corpus of {} tokens -> {}",
        report.vocab_size,
        runtime_seconds,
        corpus_tokens,
        output.display()
    )?;
    if let Some(p) = report_path {
        write_json(&p, &report)?;
    }
    Ok(report)
}

pub fn cmd_tokenize(args: &TokenizeArgs, stdin: &mut (dyn BufRead + Send), stdout: &mut (dyn Write + Send)) -> Result<()> {
    let mut model = open_model(&args.model)?;
    if let Some(a) = args.algorithm {
        model = model.expect_algorithm(a)?;
    }
    if let Some(m) = args.mode {
        model = model.expect_mode(m)?;
    }
    if args.no_spaces && !model.space_mode().isolates() {
        log::warn!("--no-spaces only removes standalone space tokens; attached tokens keep their spaces");
    }
    let lines = match &args.input {
        Some(p) => read_lines(BufReader::new(File::open(resolve_input(p))?))?,
        None => read_lines(stdin)?,
    };
    let space = model.space_symbol();
    for line in &lines {
        let mut tokens = model.tokenize(line)?;
        if args.no_spaces {
            tokens = tokens.strip_spaces(space);
        }
        let rendered = if args.ids {
            tokens.ids().iter().map(u32::to_string).collect::<Vec<_>>().join(",")
        } else {
            tokens.displays().join(" ")
        };
        writeln!(stdout, "{rendered}")?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, stdout: &mut (dyn Write + Send)) -> Result<EvaluateOutput> {
    let model = open_model(&args.model)?;
    let opts = IngestOptions { lowercase: args.lowercase };
    let (mut records, ingest) = ingest_dataset(&resolve_input(&args.dataset), args.format, opts)?;
    log::info!("ingested {} records ({:?})", records.len(), ingest);
    if let Some(which) = args.subset {
        let lexicon = match &args.lexicon {
            Some(p) => AffixLexicon::load(&resolve_input(p))?,
            None => AffixLexicon::bundled_english(),
        };
        records = filter_affix_subset(&records, Some(&lexicon), which);
    }
    let aggregation = if args.macro_average { Aggregation::Macro } else { Aggregation::Micro };
    let result = evaluate(&model, &records, aggregation)?;
    writeln!(stdout, "{result}")?;
    let out = EvaluateOutput { ingest, subset: args.subset, result };
    if let Some(p) = &args.report {
        write_json(p, &out)?;
    }
    Ok(out)
}

pub fn cmd_analyze(args: &AnalyzeArgs, stdout: &mut (dyn Write + Send)) -> Result<AnalyzeOutput> {
    let lexicon = match &args.lexicon {
        None => Some(AffixLexicon::bundled_english()),
        Some(p) => {
            let p = resolve_input(p);
            if p.exists() {
                Some(AffixLexicon::load(&p)?)
            } else {
                log::warn!("lexicon {} not found; affix counts omitted", p.display());
                None
            }
        }
    };
    let mut models = Vec::with_capacity(args.models.len());
    let mut analyses = Vec::with_capacity(args.models.len());
    for path in &args.models {
        let model = open_model(path)?;
        let vocab = model.vocab();
        let space = model.space_symbol();
        let d = degeneracy(&vocab, space);
        let (prefixes, suffixes) = match &lexicon {
            Some(lex) => {
                let (p, s) = affix_counts(&vocab, lex, space);
                (Some(p), Some(s))
            }
            None => (None, None),
        };
        analyses.push(ModelAnalysis {
            path: path.clone(),
            algorithm: model.algorithm(),
            mode: model.space_mode(),
            vocab_size: vocab.len(),
            degeneracy: d.ratio,
            duplicate_pairs: d.duplicates.len(),
            prefixes,
            suffixes,
        });
        models.push(model);
    }
    let (mut forward, mut converse) = (None, None);
    match &models[..] {
        [default, modified] if !default.space_mode().isolates() && modified.space_mode().isolates() => {
            let o = overlap(&default.vocab(), &modified.vocab(), default.space_symbol());
            forward = Some(o.forward);
            converse = Some(o.converse);
        }
        [_, _] => log::warn!("overlap needs an attached model followed by an isolated one"),
        [_] => {}
        _ => log::warn!("overlap is only computed for exactly two models"),
    }
    for a in &analyses {
        write!(
            stdout,
            "{}\t{} {}\tsize {}\tdegeneracy {}",
            a.path.display(),
            a.algorithm,
            a.mode,
            a.vocab_size,
            percent(a.degeneracy)
        )?;
        if let (Some(p), Some(s)) = (a.prefixes, a.suffixes) {
            write!(stdout, "\tprefixes {p}\tsuffixes {s}")?;
        }
        writeln!(stdout)?;
    }
    if let (Some(f), Some(c)) = (forward, converse) {
        writeln!(stdout, "overlap {} (converse {})", percent(f), percent(c))?;
    }
    let out = AnalyzeOutput { models: analyses, overlap: forward, converse_overlap: converse };
    if let Some(p) = &args.report {
        write_json(p, &out)?;
    }
    Ok(out)
}

pub fn cmd_segment_demo(args: &DemoArgs, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let AnyModel::Unigram(model) = open_model(&args.model)?.expect_algorithm(Algorithm::Unigram)? else {
        unreachable!("algorithm checked above");
    };
    let text = args.text.join("");
    let tokens = model.segment_unspaced(&text)?;
    writeln!(stdout, "{}", tokens.displays().join(" "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_ok(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = run_from_args(
            std::iter::once("spacetok").chain(args.iter().copied()),
            &mut std::io::empty(),
            &mut out,
        );
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_ok(&["frobnicate"]).0, 2);
        assert_eq!(run_ok(&["train", "--mode", "sideways", "x"]).0, 2);
    }

    #[test]
    fn missing_files_are_io_errors() {
        let (code, _) = run_ok(&["tokenize", "/nonexistent/model.txt"]);
        assert_eq!(code, Error::Io(std::io::Error::other("x")).exit_code());
    }

    #[test]
    fn run_config_parses() {
        let cfg: RunConfig = toml::from_str(
            "algorithm = \"unigram\"\nmode = \"isolated\"\nvocab_size = 300\n[unigram]\nshrink_factor = 0.5\n[normalization]\nunicode_normalization = \"nfkc\"\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Some(Algorithm::Unigram));
        assert_eq!(cfg.mode, Some(SpaceMode::Isolated));
        assert_eq!(cfg.unigram.unwrap().shrink_factor, 0.5);
        assert_eq!(cfg.normalization.unwrap().unicode_normalization, UnicodeForm::Nfkc);
        assert!(toml::from_str::<RunConfig>("vocab = 3").is_err());
    }
}
