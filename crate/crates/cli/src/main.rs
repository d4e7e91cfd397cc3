//! `haiku`: clean data, train models, generate poems and run blind surveys.

mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use haiku_core::corpus::{self, FormatHint, Which};
use haiku_core::embedding::{self, EmbeddingModel, SgnsConfig};
use haiku_core::evalharness;
use haiku_core::generate::{self, BeamModels, SearchConfig};
use haiku_core::ngram::{self, NGramModel};
use haiku_core::rnn::{self, Level, LstmNet, NetConfig, Optimizer, SamplerConfig, SymbolTable, TrainConfig};
use haiku_core::simpredictor::{self, IterationUnit, LinearSimilarityModel, SimConfig};
use haiku_core::syllable::SyllableLexicon;
use haiku_core::{Error, Haiku};

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "haiku", version, about = "Complete a haiku from its first line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a raw haiku dataset into the corpus format.
    Clean(CleanArgs),
    /// Split a corpus into train and test halves.
    Split(SplitArgs),
    /// Train the smoothed bigram model.
    TrainNgram(TrainNgramArgs),
    /// Train skip-gram word embeddings.
    TrainEmbed(TrainEmbedArgs),
    /// Train the similarity regressor used by beam search.
    TrainSim(TrainSimArgs),
    /// Train a character- or word-level LSTM.
    TrainRnn(TrainRnnArgs),
    /// Generate lines 2 and 3 for a first line.
    Gen(GenArgs),
    /// Sample human-written poems from a corpus.
    Oracle(OracleArgs),
    /// Build a blind survey sheet and its answer key.
    SurveyMake(SurveyMakeArgs),
    /// Average survey scores per engine and question.
    SurveyScore(SurveyScoreArgs),
    /// Export the loss trace stored in a model file as CSV.
    Curves(CurvesArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
struct CleanArgs {
    #[arg(long)]
    input: PathBuf,
    /// auto, csv, tsv or one-per-line.
    #[arg(long, default_value = "auto")]
    format: String,
    #[arg(long)]
    output: PathBuf,
    /// Where to list rejected rows.
    #[arg(long)]
    skipped: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = corpus::DEFAULT_SPLIT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainNgramArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = ngram::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainEmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainSimArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Held-out corpus scored in the error trace.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long)]
    ngram: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    /// What one iteration consumes: one minibatch, or one full pass.
    #[arg(long, value_enum, default_value = "batch")]
    iteration_unit: IterationUnitArg,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = simpredictor::DEFAULT_BUCKETS)]
    buckets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LevelArg {
    Char,
    Word,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Char => Level::Char,
            LevelArg::Word => Level::Word,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum IterationUnitArg {
    Batch,
    Pass,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args, Serialize)]
struct TrainRnnArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, value_enum)]
    level: LevelArg,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Word-level embedding width.
    #[arg(long, default_value_t = 32)]
    embedding_dim: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Context length; 10 for characters and 6 for words by default.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.005)]
    learning_rate: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Greedy,
    Beam,
    RnnChar,
    RnnWord,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, required_unless_present = "prompts", conflicts_with = "prompts")]
    first_line: Option<String>,
    /// File with one first line per row; requires --output.
    #[arg(long, requires = "output")]
    prompts: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ngram: Option<PathBuf>,
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[arg(long)]
    sim: Option<PathBuf>,
    #[arg(long)]
    rnn: Option<PathBuf>,
    /// Extra syllable exceptions layered over the built-in list.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = embedding::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    beam_width: usize,
    /// Syllable budgets of lines 2 and 3.
    #[arg(long, num_args = 2, value_delimiter = ',', default_values_t = generate::DEFAULT_BUDGETS)]
    budgets: Vec<u32>,
    /// Accept lines that reach the budget without hitting it exactly.
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    max_tokens_per_line: Option<usize>,
    /// Leave out the trailing `# source=... seed=...` line.
    #[arg(long)]
    no_metadata: bool,
    /// Write poems to this file in corpus format instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct OracleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SurveyMakeArgs {
    /// ENGINE=PATH pairs; each PATH is a corpus-format poem file.
    #[arg(long = "engine", required = true, value_parser = parse_engine)]
    engines: Vec<(String, PathBuf)>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sheet: PathBuf,
    #[arg(long)]
    key: PathBuf,
}

fn parse_engine(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected ENGINE=PATH, got {s:?}")),
    }
}

#[derive(Debug, Args, Serialize)]
struct SurveyScoreArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CurvesArgs {
    /// A similarity model or RNN checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Trailing average width in iterations (similarity traces only).
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

const MODEL_FORMATS: [&str; 4] = ["ngram", "embedding", "similarity model", "rnn checkpoint"];

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Manifest { .. } => 2,
            CliError::Core(e) => match e {
                Error::Format { format, .. } if MODEL_FORMATS.contains(format) => 3,
                Error::OutOfVocabulary(_)
                | Error::AllWordsBanned
                | Error::NoCompletion(_)
                | Error::Diverged { .. }
                | Error::VocabTooSmall(..) => 3,
                _ => 2,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    ExitCode::from(run(argv))
}

fn run(argv: Vec<OsString>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> CliResult<()> {
    match command {
        Command::Clean(a) => clean(&a, argv),
        Command::Split(a) => split(&a, argv),
        Command::TrainNgram(a) => train_ngram(&a, argv),
        Command::TrainEmbed(a) => train_embed(&a, argv),
        Command::TrainSim(a) => train_sim(&a, argv),
        Command::TrainRnn(a) => train_rnn(&a, argv),
        Command::Gen(a) => gen(&a, argv),
        Command::Oracle(a) => oracle(&a, argv),
        Command::SurveyMake(a) => survey_make(&a, argv),
        Command::SurveyScore(a) => survey_score(&a, argv),
        Command::Curves(a) => curves(&a, argv),
        Command::Replay(a) => replay(&a),
    }
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        })
        .map_err(CliError::from)
}

fn read_corpus(path: &Path) -> CliResult<Vec<Haiku>> {
    Ok(corpus::read_corpus(path)?)
}

fn clean(a: &CleanArgs, argv: Vec<String>) -> CliResult<()> {
    let hint: FormatHint = a.format.parse()?;
    let report = corpus::load_dataset(&a.input, hint)?;
    let (kept, mut skipped) = corpus::clean_all(&report.records);
    skipped.extend(report.skipped.iter().copied());
    skipped.sort_by_key(|s| s.row);
    write(&a.output, &corpus::corpus_to_string(&kept))?;
    let mut outputs = vec![(a.output.clone(), "corpus")];
    if let Some(path) = &a.skipped {
        write(path, &corpus::skip_report_csv(&skipped))?;
        outputs.push((path.clone(), "skip report"));
    }
    eprintln!(
        "kept {} haikus, skipped {} rows, replaced {} invalid UTF-8 sequences",
        kept.len(),
        skipped.len(),
        report.invalid_utf8
    );
    RunManifest::new("clean", argv, a).inputs([&a.input]).write(&outputs)
}

fn split(a: &SplitArgs, argv: Vec<String>) -> CliResult<()> {
    let corpus = read_corpus(&a.corpus)?;
    let split = corpus::split_corpus(&corpus, a.ratio, a.seed)?;
    write(&a.train, &corpus::corpus_to_string(&split.train))?;
    write(&a.test, &corpus::corpus_to_string(&split.test))?;
    eprintln!(
        "train {} haikus, test {} ({} test first lines)",
        split.train.len(),
        split.test.len(),
        corpus::first_lines(&split, Which::Test).len()
    );
    RunManifest::new("split", argv, a)
        .seed("split", a.seed)
        .inputs([&a.corpus])
        .write(&[(a.train.clone(), "corpus"), (a.test.clone(), "corpus")])
}

fn train_ngram(a: &TrainNgramArgs, argv: Vec<String>) -> CliResult<()> {
    let model = ngram::train_ngram(&read_corpus(&a.corpus)?, a.alpha)?;
    model.save(&a.output)?;
    RunManifest::new("train-ngram", argv, a)
        .inputs([&a.corpus])
        .write(&[(a.output.clone(), ngram::FORMAT_HEADER)])
}

fn train_embed(a: &TrainEmbedArgs, argv: Vec<String>) -> CliResult<()> {
    let cfg = SgnsConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    let model = embedding::train_sgns(&read_corpus(&a.corpus)?, &cfg)?;
    model.save(&a.output)?;
    RunManifest::new("train-embed", argv, a)
        .seed("sgns", a.seed)
        .inputs([&a.corpus])
        .write(&[(a.output.clone(), embedding::FORMAT_HEADER)])
}

fn train_sim(a: &TrainSimArgs, argv: Vec<String>) -> CliResult<()> {
    let emb = EmbeddingModel::load(&a.embedding)?;
    let ngram = NGramModel::load(&a.ngram)?;
    let (train, short) = simpredictor::build_examples(&read_corpus(&a.corpus)?, &emb);
    let validation = match &a.validation {
        Some(path) => simpredictor::build_examples(&read_corpus(path)?, &emb).0,
        None => Vec::new(),
    };
    let cfg = SimConfig {
        learning_rate: a.learning_rate,
        iterations: a.iterations,
        unit: match a.iteration_unit {
            IterationUnitArg::Batch => IterationUnit::Batch,
            IterationUnitArg::Pass => IterationUnit::Pass,
        },
        batch_size: a.batch_size,
        seed: a.seed,
        buckets: a.buckets,
    };
    let model = simpredictor::train_sim(&train, &validation, &ngram, &cfg)?;
    model.save(&a.output)?;
    if let Some((it, mae)) = model.trace().last() {
        eprintln!(
            "{} examples ({short} lines too short); mean absolute error {mae:.4} after {it} iterations",
            train.len()
        );
    }
    let mut inputs = vec![&a.corpus, &a.embedding, &a.ngram];
    inputs.extend(&a.validation);
    RunManifest::new("train-sim", argv, a)
        .seed("sgd", a.seed)
        .inputs(inputs)
        .write(&[(a.output.clone(), simpredictor::FORMAT_HEADER)])
}

fn train_rnn(a: &TrainRnnArgs, argv: Vec<String>) -> CliResult<()> {
    let level = Level::from(a.level);
    let corpus = read_corpus(&a.corpus)?;
    let table = SymbolTable::from_corpus(&corpus, level);
    let cfg = NetConfig {
        hidden_size: a.hidden,
        embedding_dim: a.embedding_dim,
        dropout: a.dropout,
        window: a.window.unwrap_or(level.default_window()),
    };
    let train_pairs = rnn::build_dataset(&corpus, &table, cfg.window);
    let val_pairs = match &a.validation {
        Some(path) => rnn::build_dataset(&read_corpus(path)?, &table, cfg.window),
        None => Vec::new(),
    };
    let mut net = LstmNet::new(table, cfg, a.seed)?;
    let train_cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: a.seed,
        clip_norm: a.clip_norm,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
    };
    for s in rnn::train(&mut net, &train_pairs, &val_pairs, &train_cfg)? {
        match s.val_loss {
            Some(v) => eprintln!("epoch {} train loss {:.4} validation loss {v:.4}", s.epoch, s.train_loss),
            None => eprintln!("epoch {} train loss {:.4}", s.epoch, s.train_loss),
        }
    }
    net.save(&a.output)?;
    let mut inputs = vec![&a.corpus];
    inputs.extend(&a.validation);
    RunManifest::new("train-rnn", argv, a)
        .seed("init+shuffle+dropout", a.seed)
        .inputs(inputs)
        .write(&[(a.output.clone(), rnn::FORMAT_HEADER)])
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str, method: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--method {method} needs --{flag}")))
}

fn gen(a: &GenArgs, argv: Vec<String>) -> CliResult<()> {
    let prompts: Vec<String> = match (&a.first_line, &a.prompts) {
        (Some(line), _) => vec![line.clone()],
        (None, Some(path)) => read(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect(),
        (None, None) => return Err(CliError::Usage("give --first-line or --prompts".into())),
    };
    let mut lexicon = SyllableLexicon::builtin();
    if let Some(path) = &a.lexicon {
        lexicon.merge(&SyllableLexicon::load(path)?)?;
    }
    let budgets = [a.budgets[0], a.budgets[1]];
    let mut inputs: Vec<&PathBuf> = a.prompts.iter().chain(&a.lexicon).collect();
    let poems: Vec<Haiku> = match a.method {
        Method::Greedy => {
            let path = require(&a.ngram, "ngram", "greedy")?;
            let ngram = NGramModel::load(path)?;
            inputs.extend(&a.ngram);
            prompts
                .iter()
                .map(|p| generate::generate_greedy(p, &ngram, &lexicon, budgets))
                .collect::<Result<_, _>>()?
        }
        Method::Beam => {
            let ngram = NGramModel::load(require(&a.ngram, "ngram", "beam")?)?;
            let embedding = EmbeddingModel::load(require(&a.embedding, "embedding", "beam")?)?;
            let predictor = LinearSimilarityModel::load(require(&a.sim, "sim", "beam")?)?;
            inputs.extend(a.ngram.iter().chain(&a.embedding).chain(&a.sim));
            let models = BeamModels {
                embedding: &embedding,
                predictor: &predictor,
                ngram: &ngram,
                lexicon: &lexicon,
            };
            let cfg = SearchConfig {
                k: a.k,
                beam_width: a.beam_width,
                line_budgets: budgets,
                strict_budget: !a.relaxed,
            };
            prompts
                .iter()
                .map(|p| generate::generate_beam(p, models, &cfg).map(|poem| poem.haiku))
                .collect::<Result<_, _>>()?
        }
        Method::RnnChar | Method::RnnWord => {
            let method = if a.method == Method::RnnChar { "rnn-char" } else { "rnn-word" };
            let net = LstmNet::load(require(&a.rnn, "rnn", method)?)?;
            inputs.extend(&a.rnn);
            let want = if a.method == Method::RnnChar { Level::Char } else { Level::Word };
            if net.level() != want {
                return Err(CliError::Usage(format!(
                    "--method {method} needs a {want}-level checkpoint, got {}",
                    net.level()
                )));
            }
            let defaults = SamplerConfig::for_level(want);
            let sampler = SamplerConfig {
                noise_scale: a.noise_scale.unwrap_or(defaults.noise_scale),
                max_tokens_per_line: a.max_tokens_per_line.unwrap_or(defaults.max_tokens_per_line),
            };
            prompts
                .iter()
                .enumerate()
                .map(|(i, p)| rnn::generate_rnn(&net, p, &sampler, a.seed.wrapping_add(i as u64)))
                .collect::<Result<_, _>>()?
        }
    };
    match &a.output {
        Some(path) => {
            write(path, &corpus::corpus_to_string(&poems))?;
            RunManifest::new("gen", argv, a)
                .seed("sampling", a.seed)
                .inputs(inputs)
                .write(&[(path.clone(), "corpus")])
        }
        None => {
            let seed = (!a.no_metadata).then_some(a.seed);
            let text: Vec<String> = poems.iter().map(|h| generate::format_poem(h, seed)).collect();
            print!("{}", text.join("\n"));
            Ok(())
        }
    }
}

fn oracle(a: &OracleArgs, argv: Vec<String>) -> CliResult<()> {
    let poems = generate::sample_oracle(&read_corpus(&a.corpus)?, a.n, a.seed)?;
    let text = corpus::corpus_to_string(&poems);
    match &a.output {
        Some(path) => {
            write(path, &text)?;
            RunManifest::new("oracle", argv, a)
                .seed("sample", a.seed)
                .inputs([&a.corpus])
                .write(&[(path.clone(), "corpus")])
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn survey_make(a: &SurveyMakeArgs, argv: Vec<String>) -> CliResult<()> {
    let mut sets = BTreeMap::new();
    for (engine, path) in &a.engines {
        if sets.insert(engine.clone(), read_corpus(path)?).is_some() {
            return Err(CliError::Usage(format!("engine {engine:?} given twice")));
        }
    }
    let (sheet, key) = evalharness::make_survey(&sets, a.n, a.seed)?;
    evalharness::write_survey(&sheet, &key, &a.sheet, &a.key)?;
    eprintln!("{} items on sheet {}", sheet.items.len(), sheet.sheet_id);
    RunManifest::new("survey-make", argv, a)
        .seed("shuffle", a.seed)
        .inputs(a.engines.iter().map(|(_, p)| p))
        .write(&[(a.sheet.clone(), "survey sheet"), (a.key.clone(), "survey key")])
}

fn survey_score(a: &SurveyScoreArgs, argv: Vec<String>) -> CliResult<()> {
    let scores = evalharness::parse_scores(&read(&a.scores)?)?;
    let key = evalharness::parse_key(&read(&a.key)?)?;
    let report = evalharness::report_to_csv(&evalharness::aggregate(&scores, &key)?);
    match &a.output {
        Some(path) => {
            write(path, &report)?;
            RunManifest::new("survey-score", argv, a)
                .inputs([&a.scores, &a.key])
                .write(&[(path.clone(), "survey report")])
        }
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn curves(a: &CurvesArgs, argv: Vec<String>) -> CliResult<()> {
    let text = read(&a.model)?;
    let csv = if text.starts_with(simpredictor::FORMAT_HEADER) {
        let model = LinearSimilarityModel::from_text(&text)?;
        match a.smooth {
            Some(window) => {
                let mut out = String::from("iteration,mean_abs_error\n");
                for (it, mae) in simpredictor::smooth_trace(model.trace(), window) {
                    out.push_str(&format!("{it},{mae:?}\n"));
                }
                out
            }
            None => model.trace_csv(),
        }
    } else if text.starts_with(rnn::FORMAT_HEADER) {
        if a.smooth.is_some() {
            return Err(CliError::Usage("--smooth applies to similarity models only".into()));
        }
        LstmNet::from_text(&text)?.trace_csv()
    } else {
        return Err(CliError::Usage(format!(
            "{} is neither a similarity model nor an RNN checkpoint",
            a.model.display()
        )));
    };
    match &a.output {
        Some(path) => {
            write(path, &csv)?;
            RunManifest::new("curves", argv, a)
                .inputs([&a.model])
                .write(&[(path.clone(), "trace csv")])
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn replay(a: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::load(&a.manifest)?;
    let mut argv = vec![OsString::from("haiku")];
    argv.extend(manifest.argv.iter().map(OsString::from));
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Manifest {
        path: a.manifest.clone(),
        message: format!("recorded arguments no longer parse: {e}"),
    })?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Manifest {
            path: a.manifest.clone(),
            message: "a manifest cannot replay another replay".into(),
        });
    }
    dispatch(cli.command, manifest.argv)
}
