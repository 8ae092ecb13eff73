//! The `caption-forge` command line.
//!
//! Exit codes: 0 on success (including `--help`), 1 on usage errors, 2 when
//! a command fails on its inputs.

use std::collections::{BTreeSet, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{frequency_csv, frequency_text, phrase_frequency_report, term_frequency, zipf_fit};
use crate::dataset::{self, CaptionRecord};
use crate::decoder::{beam_search_traced, caption_image, BeamConfig, Candidate};
use crate::embedding::{mock_embed, EmbeddingStore, VGG16_DIM};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_run, PredictionRecord, RougeMode};
use crate::neural::{self, ArchitectureKind, ArchitectureSpec, NeuralModel, TrainConfig, MODEL_MAGIC};
use crate::ngram::{NgramModel, DEFAULT_ORDER};
use crate::scorer::Scorer;
use crate::synthetic::{clustered_embeddings, naive_agent_corpus};
use crate::text::{Vocabulary, DEFAULT_MAX_LEN};

pub const SEED_ENV: &str = "CAPTION_FORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "caption-forge", version, about = "Image caption language models: data prep, training, decoding, evaluation")]
struct Cli {
    /// Seed for every random choice (falls back to $CAPTION_FORGE_SEED, then the config file, then 0)
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// `key = value` file supplying defaults for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize raw captions and build the vocabulary
    Preprocess(PreprocessArgs),
    /// Split a token file into training and validation sets
    Split(SplitArgs),
    /// Expand captions into (image, prefix) -> next-token examples
    Expand(ExpandArgs),
    /// Write deterministic stand-in image embeddings, or convert a CSV table
    MockEmbed(MockEmbedArgs),
    /// Count n-grams into a backoff language model
    TrainNgram(TrainNgramArgs),
    /// Train an LSTM caption model
    TrainNeural(TrainNeuralArgs),
    /// Decode captions for every image in an embedding file
    Caption(CaptionArgs),
    /// Score predictions with BLEU, ROUGE-L and diversity statistics
    Evaluate(EvaluateArgs),
    /// Term frequencies, Zipf fit, phrase audits and leading n-gram tables
    Analyze(AnalyzeArgs),
    /// Show how a trigram agent with a small beam ends up at "chicken and waffles"
    DemoNaiveAgent(DemoArgs),
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// JSONL of {photo_id, caption, label?}
    #[arg(long = "in")]
    input: PathBuf,
    /// JSONL of {photo_id, tokens, label?}
    #[arg(long)]
    out: PathBuf,
    /// Vocabulary file [default: <out> with extension .vocab]
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long)]
    min_freq: Option<u64>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    val_out: PathBuf,
    /// Share of captions held out for validation
    #[arg(long)]
    fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Binary example cache
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Args)]
struct MockEmbedArgs {
    /// Any JSONL with a photo_id field (captions or tokens)
    #[arg(long = "in", required_unless_present = "from_csv", conflicts_with = "from_csv")]
    input: Option<PathBuf>,
    /// Convert `photo_id,v1,...,vdim` rows instead of generating vectors
    #[arg(long)]
    from_csv: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Cluster vectors by the records' label with this much per-photo noise
    #[arg(long)]
    cluster_noise: Option<f32>,
}

#[derive(Debug, Args)]
struct TrainNgramArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Model order n
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainNeuralArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// inject, merge-concat or merge-add
    #[arg(long)]
    arch: Option<ArchitectureKind>,
    /// Word embedding, LSTM and image projection width in one flag
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    image_dense_dim: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without improvement before stopping; 0 disables early stopping
    #[arg(long)]
    patience: Option<usize>,
    /// Pretrained word vectors (`token v1 ... vE` per line)
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Write the per-epoch loss curve as CSV
    #[arg(long)]
    history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CaptionArgs {
    /// NICM neural model or NGRAM text model
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// JSONL of {photo_id, caption, score, omegas}
    #[arg(long)]
    out: PathBuf,
    /// Only caption the photo ids listed in this JSONL file
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Length discount; 0.6, 0.7 and 0.8 are the usual sweep
    #[arg(long)]
    alpha: Option<f64>,
    /// Beam width
    #[arg(long)]
    beta: Option<usize>,
    /// Expansions per candidate
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// JSONL with photo_id and either tokens or caption
    #[arg(long)]
    references: PathBuf,
    /// recall or f1
    #[arg(long)]
    rouge_mode: Option<RougeMode>,
    #[arg(long)]
    group_by_label: bool,
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Row label in the table
    #[arg(long, default_value = "model")]
    name: String,
    /// Alpha the predictions were decoded with, for the table
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Token file to count
    #[arg(long = "in")]
    input: PathBuf,
    /// Rows to print
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Full frequency table as CSV
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Predictions to audit for --phrase
    #[arg(long, requires = "phrase")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    phrase: Option<String>,
    /// N-gram model for continuation tables (needs --vocab)
    #[arg(long, requires = "vocab")]
    ngram: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Context for a continuation table; repeatable, "" for caption starts
    #[arg(long)]
    context: Vec<String>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    kappa: Option<usize>,
}

/// Simple `key = value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    what: "config file",
                    line: n + 1,
                    detail: format!("expected key = value, got {line:?}"),
                });
            };
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// The flag value if given, else the config value, else `default`.
    pub fn resolve<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| Error::Parse {
                what: "config file",
                line: 0,
                detail: format!("bad value {raw:?} for {key}"),
            }),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = config.resolve(cli.seed, "seed", 0u64)?;
    match cli.command {
        Command::Preprocess(a) => preprocess(a, &config),
        Command::Split(a) => split(a, &config, seed),
        Command::Expand(a) => expand(a, &config),
        Command::MockEmbed(a) => mock_embed_cmd(a, &config, seed),
        Command::TrainNgram(a) => train_ngram(a, &config),
        Command::TrainNeural(a) => train_neural(a, &config, seed),
        Command::Caption(a) => caption(a, &config),
        Command::Evaluate(a) => evaluate(a, &config),
        Command::Analyze(a) => analyze(a),
        Command::DemoNaiveAgent(a) => {
            let cfg = BeamConfig {
                alpha: config.resolve(a.alpha, "alpha", 0.6)?,
                beta: config.resolve(a.beta, "beta", 2)?,
                kappa: config.resolve(a.kappa, "kappa", 2)?,
                max_len: DEFAULT_MAX_LEN,
            };
            Ok(demo_naive_agent(&cfg)?.text)
        }
    }
}

fn preprocess(a: PreprocessArgs, config: &Config) -> Result<String> {
    let min_freq = config.resolve(a.min_freq, "min_freq", 1)?;
    let records = dataset::read_raw_captions(&a.input)?
        .iter()
        .map(CaptionRecord::from_raw)
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::build(records.iter().map(|r| &r.tokens), min_freq)?;
    let vocab_path = a.vocab_out.unwrap_or_else(|| a.out.with_extension("vocab"));
    dataset::write_records(&a.out, &records)?;
    vocab.save(&vocab_path)?;
    Ok(format!(
        "{} captions, vocabulary of {} -> {}, {}\n",
        records.len(),
        vocab.len(),
        a.out.display(),
        vocab_path.display()
    ))
}

fn split(a: SplitArgs, config: &Config, seed: u64) -> Result<String> {
    let fraction = config.resolve(a.fraction, "validation_fraction", 0.2)?;
    let records = dataset::read_records(&a.input)?;
    let (train, val) = dataset::split(&records, fraction, seed)?;
    dataset::write_records(&a.train_out, &train)?;
    dataset::write_records(&a.val_out, &val)?;
    Ok(format!("{} training, {} validation captions\n", train.len(), val.len()))
}

fn expand(a: ExpandArgs, config: &Config) -> Result<String> {
    let max_len = config.resolve(a.max_len, "max_len", DEFAULT_MAX_LEN)?;
    let records = dataset::read_records(&a.input)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let expanded = dataset::expand_all(&records, &vocab, max_len);
    dataset::save_cache(&a.out, &expanded.examples, max_len)?;
    Ok(format!(
        "{} examples from {} captions ({:.2} per caption)\n",
        expanded.len(),
        expanded.captions,
        expanded.examples_per_caption()
    ))
}

#[derive(Deserialize)]
struct PhotoRef {
    photo_id: String,
    #[serde(default)]
    label: Option<String>,
}

/// Photo ids in first-appearance order with their first label.
fn unique_photos(path: &Path) -> Result<Vec<(String, Option<String>)>> {
    let rows: Vec<PhotoRef> = dataset::read_jsonl(path, "photo id file")?;
    let mut seen = BTreeSet::new();
    Ok(rows
        .into_iter()
        .filter(|r| seen.insert(r.photo_id.clone()))
        .map(|r| (r.photo_id, r.label))
        .collect())
}

fn mock_embed_cmd(a: MockEmbedArgs, config: &Config, seed: u64) -> Result<String> {
    let store = if let Some(csv) = &a.from_csv {
        EmbeddingStore::from_csv(csv)?
    } else {
        let input = a.input.as_ref().expect("clap enforces --in or --from-csv");
        let dim = config.resolve(a.dim, "dim", VGG16_DIM)?;
        let photos = unique_photos(input)?;
        match config.resolve(a.cluster_noise, "cluster_noise", -1.0f32)? {
            noise if noise >= 0.0 => {
                clustered_embeddings(photos.iter().map(|(id, l)| (id.as_str(), l.as_deref())), dim, noise, seed)?
            }
            _ => {
                let mut store = EmbeddingStore::new(dim);
                for (id, _) in &photos {
                    store.insert(id.clone(), mock_embed(id, dim, seed))?;
                }
                store
            }
        }
    };
    store.save(&a.out)?;
    Ok(format!("{} embeddings of dim {} -> {}\n", store.len(), store.dim(), a.out.display()))
}

fn train_ngram(a: TrainNgramArgs, config: &Config) -> Result<String> {
    let n = config.resolve(a.order, "order", DEFAULT_ORDER)?;
    let records = dataset::read_records(&a.input)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let model = NgramModel::train(records.iter().map(|r| &r.tokens), n, &vocab)?;
    model.save(&a.out)?;
    Ok(format!("{n}-gram model over {} captions -> {}\n", records.len(), a.out.display()))
}

fn train_neural(a: TrainNeuralArgs, config: &Config, seed: u64) -> Result<String> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let store = EmbeddingStore::load(&a.embeddings)?;
    let kind = config.resolve(a.arch, "arch", ArchitectureKind::MergeConcat)?;
    let dim = config.resolve(a.dim, "dim", 256)?;
    let spec = ArchitectureSpec {
        kind,
        embedding_dim: config.resolve(a.embedding_dim, "embedding_dim", dim)?,
        lstm_hidden_dim: config.resolve(a.hidden_dim, "hidden_dim", dim)?,
        image_dense_dim: config.resolve(a.image_dense_dim, "image_dense_dim", dim)?,
        image_input_dim: store.dim(),
        vocab_size: vocab.len(),
        max_len: config.resolve(a.max_len, "max_len", DEFAULT_MAX_LEN)?,
    };
    let defaults = TrainConfig::default();
    let patience = config.resolve(a.patience, "patience", defaults.patience.unwrap_or(0))?;
    let train_cfg = TrainConfig {
        learning_rate: config.resolve(a.learning_rate, "learning_rate", defaults.learning_rate)?,
        momentum: config.resolve(a.momentum, "momentum", defaults.momentum)?,
        decay: config.resolve(a.decay, "decay", defaults.decay)?,
        batch_size: config.resolve(a.batch_size, "batch_size", defaults.batch_size)?,
        max_epochs: config.resolve(a.max_epochs, "max_epochs", defaults.max_epochs)?,
        patience: (patience > 0).then_some(patience),
        seed,
    };
    let train_set = dataset::expand_all(&dataset::read_records(&a.train)?, &vocab, spec.max_len).examples;
    let val_set = dataset::expand_all(&dataset::read_records(&a.val)?, &vocab, spec.max_len).examples;

    let mut model = NeuralModel::build(spec, seed)?;
    if let Some(path) = &a.word_vectors {
        let n = neural::load_word_vectors(path, &vocab, &mut model)?;
        log::info!("initialized {n} word vectors from {}", path.display());
    }
    let outcome = neural::train_model(model, &train_set, &val_set, &store, &train_cfg)?;
    outcome.model.save(&a.out)?;
    if let Some(path) = &a.history_out {
        fs::write(path, outcome.history_csv()).map_err(|e| Error::io(path, e))?;
    }
    let mut out = outcome.history_csv();
    let _ = writeln!(
        out,
        "{kind} model with {} parameters, best epoch {}{} -> {}",
        outcome.model.params.num_parameters(),
        outcome.best_epoch,
        if outcome.stopped_early { " (stopped early)" } else { "" },
        a.out.display()
    );
    Ok(out)
}

/// Loads a decoder backend, telling the formats apart by their first bytes.
pub fn load_scorer(model: &Path, vocab: &Vocabulary) -> Result<Box<dyn Scorer>> {
    let bytes = fs::read(model).map_err(|e| Error::io(model, e))?;
    if bytes.starts_with(&MODEL_MAGIC) {
        let m = NeuralModel::from_bytes(&bytes)?;
        if m.spec.vocab_size != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                found: m.spec.vocab_size,
            });
        }
        Ok(Box::new(m))
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            what: "model file",
            line: 1,
            detail: "neither a NICM model nor an NGRAM text model".into(),
        })?;
        Ok(Box::new(NgramModel::parse(&text, vocab)?))
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn caption(a: CaptionArgs, config: &Config) -> Result<String> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let scorer = load_scorer(&a.model, &vocab)?;
    let store = EmbeddingStore::load(&a.embeddings)?;
    let cfg = BeamConfig {
        alpha: config.resolve(a.alpha, "alpha", 0.6)?,
        beta: config.resolve(a.beta, "beta", 3)?,
        kappa: config.resolve(a.kappa, "kappa", 3)?,
        max_len: config.resolve(a.max_len, "max_len", DEFAULT_MAX_LEN)?,
    };
    cfg.validate()?;
    let jobs = config.resolve(a.jobs, "jobs", 1)?;
    let ids: Vec<String> = match &a.ids {
        Some(p) => unique_photos(p)?.into_iter().map(|(id, _)| id).collect(),
        None => store.iter().map(|(id, _)| id.to_string()).collect(),
    };

    // results are collected in input order whatever the thread count
    let predictions = thread_pool(jobs)?.install(|| {
        ids.par_iter()
            .map(|id| {
                let c = caption_image(&scorer, store.require(id)?, &cfg, &vocab)?;
                Ok(PredictionRecord {
                    photo_id: id.clone(),
                    caption: c.text(),
                    score: c.score,
                    omegas: c.omegas,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    dataset::write_jsonl(&a.out, &predictions)?;
    Ok(format!("{} captions -> {}\n", predictions.len(), a.out.display()))
}

fn evaluate(a: EvaluateArgs, config: &Config) -> Result<String> {
    let mode = config.resolve(a.rouge_mode, "rouge_mode", RougeMode::F1)?;
    let jobs = config.resolve(a.jobs, "jobs", 1)?;
    let report = thread_pool(jobs)?.install(|| evaluate_run(&a.predictions, &a.references, a.group_by_label, mode))?;
    if let Some(path) = &a.json_out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(report.to_table(&a.name, a.alpha))
}

fn analyze(a: AnalyzeArgs) -> Result<String> {
    let records = dataset::read_records(&a.input)?;
    let table = term_frequency(records.iter().map(|r| &r.tokens))?;
    if let Some(path) = &a.csv_out {
        fs::write(path, frequency_csv(&table)).map_err(|e| Error::io(path, e))?;
    }
    let top: Vec<_> = table.iter().take(a.top).cloned().collect();
    let mut out = frequency_text("term frequencies", &top);
    let counts: Vec<u64> = table.iter().map(|p| p.1).collect();
    match zipf_fit(&counts) {
        Ok(fit) => {
            let _ = writeln!(
                out,
                "\nzipf fit over {} ranks: slope {:.4}, intercept {:.4}, r^2 {:.4}",
                counts.len(),
                fit.slope,
                fit.intercept,
                fit.r_squared
            );
        }
        Err(e) => {
            let _ = writeln!(out, "\nzipf fit skipped: {e}");
        }
    }

    if let (Some(preds), Some(phrase)) = (&a.predictions, &a.phrase) {
        let words: Vec<Vec<String>> = crate::metrics::read_predictions(preds)?
            .into_iter()
            .map(|p| p.caption.split_whitespace().map(str::to_string).collect())
            .collect();
        let phrase: Vec<&str> = phrase.split_whitespace().collect();
        let (n, frac) = phrase_frequency_report(&words, &phrase);
        let _ = writeln!(
            out,
            "\n\"{}\" appears in {n} of {} predictions ({:.1}%)",
            phrase.join(" "),
            words.len(),
            100.0 * frac
        );
    }

    if let (Some(model), Some(vocab)) = (&a.ngram, &a.vocab) {
        let vocab = Vocabulary::load(vocab)?;
        let model = NgramModel::load(model, &vocab)?;
        let contexts = if a.context.is_empty() { vec![String::new()] } else { a.context.clone() };
        for ctx in contexts {
            let words: Vec<&str> = ctx.split_whitespace().collect();
            let rows = model.leading_ngram_table(&words, a.top);
            let _ = write!(out, "\n{}", frequency_text(&format!("after [{}]", words.join(" ")), &rows));
        }
    }
    Ok(out)
}

/// Result of [`demo_naive_agent`].
#[derive(Debug, Clone)]
pub struct DemoReport {
    /// Final population, best first, as caption text.
    pub population: Vec<String>,
    /// The printed walkthrough.
    pub text: String,
}

fn candidate_line(c: &Candidate, vocab: &Vocabulary) -> String {
    let words = c
        .tokens
        .iter()
        .map(|&t| vocab.token(t).unwrap_or("?"))
        .collect::<Vec<_>>()
        .join(" ");
    format!("{words}  (score {:.4})", c.score)
}

/// Trains a trigram model on [`naive_agent_corpus`], prints its leading
/// n-gram tables and traces a beam search from a blank image.
pub fn demo_naive_agent(cfg: &BeamConfig) -> Result<DemoReport> {
    let corpus = naive_agent_corpus();
    let vocab = Vocabulary::build(corpus.iter().map(|r| &r.tokens), 1)?;
    let model = NgramModel::train(corpus.iter().map(|r| &r.tokens), DEFAULT_ORDER, &vocab)?;
    let mut text = String::from("corpus:\n");
    for r in &corpus {
        let _ = writeln!(text, "  {}", r.tokens.words().join(" "));
    }
    for ctx in [&[][..], &["chicken"][..], &["chicken", "and"][..]] {
        let rows = model.leading_ngram_table(ctx, 5);
        let _ = write!(text, "\n{}", frequency_text(&format!("after [{}]", ctx.join(" ")), &rows));
    }

    let blank = crate::embedding::ImageEmbedding::zeros(1);
    let (population, trace) = beam_search_traced(&model, &blank, cfg)?;
    let _ = writeln!(
        text,
        "\nbeam search with beta={}, kappa={}, alpha={}:",
        cfg.beta, cfg.kappa, cfg.alpha
    );
    for (i, step) in trace.iterations.iter().enumerate() {
        let _ = writeln!(text, "iteration {}:", i + 1);
        for c in step {
            let _ = writeln!(text, "  {}", candidate_line(c, &vocab));
        }
    }
    let captions: Vec<String> = population.iter().map(|c| c.words(&vocab).join(" ")).collect();
    let _ = writeln!(text, "\nfinal population:");
    for c in &captions {
        let _ = writeln!(text, "  {c}");
    }
    let hit = captions.iter().any(|c| c == "chicken and waffles");
    let _ = writeln!(
        text,
        "\n\"chicken and waffles\" {} the final population",
        if hit { "is in" } else { "is not in" }
    );
    Ok(DemoReport {
        population: captions,
        text,
    })
}
