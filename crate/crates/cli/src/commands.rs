use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use reactmine::dataset::{corpus_stats, filter_by_threshold, load_corpus, split, Corpus, CorpusFormat};
use reactmine::ensemble::FeatureSet;
use reactmine::fallback::{train_and_evaluate, SvmConfig};
use reactmine::lexicon::{Lexicon, SynonymTable};
use reactmine::miner::{self, annotate_sentences};
use reactmine::models::{
    load_glove, longest_post, prepare_examples, train, Architecture, CnnConfig, EmbeddingTable, LstmConfig,
    ModelKind, TrainConfig, DEFAULT_MAX_LEN,
};
use reactmine::numerics::OptimizerConfig;
use reactmine::pipeline::{
    compare_models, ensemble_data, fit_ensemble, Manifest, Predictor, CNN_STEM, ENSEMBLE_FILE, FALLBACK_FILE,
    LEXICON_FILE, RNN_STEM,
};
use reactmine::textprep::WordLists;

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Auto,
    Csv,
    Jsonl,
}

impl InputFormat {
    fn resolve(self, path: &Path) -> CorpusFormat {
        match self {
            InputFormat::Auto => CorpusFormat::from_path(path),
            InputFormat::Csv => CorpusFormat::Csv,
            InputFormat::Jsonl => CorpusFormat::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ArtifactArgs {
    /// Directory holding trained artifacts.
    #[arg(long, env = "REACTMINE_ARTIFACTS", default_value = "artifacts")]
    pub artifacts: PathBuf,
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected three comma-separated fractions".into()),
    }
}

/// Corpus selection shared by every command that trains or evaluates, so
/// they all see the same partition.
#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Corpus file (JSON lines or CSV).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub corpus_format: InputFormat,
    /// Keep posts with at least this many reactions (likes counted only in
    /// the six-class setting).
    #[arg(long, default_value_t = 1)]
    pub min_reactions: u64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_fractions)]
    pub fractions: (f64, f64, f64),
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
}

impl SplitArgs {
    fn load(&self, include_like: bool) -> Result<(Corpus, Corpus, Corpus)> {
        let corpus = load_corpus(&self.corpus, self.corpus_format.resolve(&self.corpus))
            .with_context(|| format!("loading {}", self.corpus.display()))?;
        let corpus = filter_by_threshold(&corpus, self.min_reactions, include_like);
        let parts = split(&corpus, self.fractions, self.split_seed)?;
        info!(
            "{} posts: {} train, {} validation, {} test",
            corpus.len(),
            parts.0.len(),
            parts.1.len(),
            parts.2.len()
        );
        Ok(parts)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw corpus file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Normalized JSON-lines output.
    #[arg(long)]
    pub output: PathBuf,
    /// Drop posts with fewer reactions than this (0 keeps everything).
    #[arg(long, default_value_t = 0)]
    pub min_reactions: u64,
    /// Count likes towards --min-reactions.
    #[arg(long)]
    pub count_likes: bool,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let corpus = load_corpus(&args.input, args.format.resolve(&args.input))
        .with_context(|| format!("loading {}", args.input.display()))?;
    let loaded = corpus.len();
    let dropped_empty = corpus.provenance.dropped_empty;
    let corpus = filter_by_threshold(&corpus, args.min_reactions, args.count_likes);
    corpus.write_jsonl(&args.output)?;
    print_json(&json!({
        "loaded": loaded,
        "dropped_empty": dropped_empty,
        "written": corpus.len(),
        "output": args.output,
    }))
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub corpus_format: InputFormat,
    #[arg(long, value_enum, default_value = "json")]
    pub format: TableFormat,
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus, args.corpus_format.resolve(&args.corpus))
        .with_context(|| format!("loading {}", args.corpus.display()))?;
    let report = corpus_stats(&corpus);
    match args.format {
        TableFormat::Json => print_json(&report),
        TableFormat::Csv => {
            print!("{}", report.to_csv());
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainFallbackArgs {
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Emotion lexicon, `word<TAB>emotion<TAB>0|1`.
    #[arg(long, env = "REACTMINE_LEXICON")]
    pub lexicon: PathBuf,
    /// Synonym table used to expand the lexicon.
    #[arg(long, env = "REACTMINE_SYNONYMS")]
    pub synonyms: Option<PathBuf>,
    /// Plain-text training sentences, one text per line.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Corpus whose comments are used as training text.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Use at most this many annotated sentences.
    #[arg(long)]
    pub max_sentences: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long, default_value_t = SvmConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = SvmConfig::default().lambda)]
    pub lambda: f64,
}

pub fn train_fallback(args: &TrainFallbackArgs) -> Result<()> {
    let mut lexicon = Lexicon::load_emolex(&args.lexicon).with_context(|| format!("loading {}", args.lexicon.display()))?;
    let base_words = lexicon.len();
    if let Some(path) = &args.synonyms {
        let syn = SynonymTable::load(path).with_context(|| format!("loading {}", path.display()))?;
        lexicon = lexicon.expand_with_synonyms(&syn);
    }

    let mut texts: Vec<String> = Vec::new();
    if let Some(path) = &args.sentences {
        let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        texts.extend(body.lines().map(str::to_string));
    }
    if let Some(path) = &args.corpus {
        let corpus = load_corpus(path, CorpusFormat::from_path(path))?;
        texts.extend(corpus.iter().flat_map(|p| p.comments.iter().cloned()));
    }
    if texts.is_empty() {
        bail!("no training text: pass --sentences and/or --corpus");
    }
    let lists = WordLists::default();
    let seqs: Vec<_> = texts.iter().flat_map(|t| miner::sentences(t, &lists)).collect();
    let (mut sentences, mut labels) = annotate_sentences(&seqs, &lexicon);
    if let Some(cap) = args.max_sentences {
        sentences.truncate(cap);
        labels.truncate(cap);
    }
    info!("{} of {} sentences carry lexicon emotions", sentences.len(), seqs.len());

    let cfg = SvmConfig {
        epochs: args.epochs,
        lambda: args.lambda,
        seed: args.seed,
        ..SvmConfig::default()
    };
    let (classifier, report) = train_and_evaluate(&sentences, &labels, args.test_fraction, args.seed, &cfg)?;

    let dir = &args.artifacts.artifacts;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    lexicon.write_emolex(&dir.join(LEXICON_FILE))?;
    classifier.save(&dir.join(FALLBACK_FILE))?;
    fs::write(dir.join("fallback_pr.json"), serde_json::to_string_pretty(&report)?)?;
    print_json(&json!({
        "lexicon_words": lexicon.len(),
        "base_lexicon_words": base_words,
        "sentences": seqs.len(),
        "annotated": sentences.len(),
        "macro_average_precision": report.macro_average_precision,
    }))
}

#[derive(Debug, Args)]
pub struct TrainNetworkArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Word vectors in GloVe text format.
    #[arg(long, env = "REACTMINE_EMBEDDINGS")]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    /// Predict likes as a sixth reaction.
    #[arg(long)]
    pub include_like: bool,
    /// Upper bound on the padded input length.
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CNN: filters per kernel height.
    #[arg(long)]
    pub filters: Option<usize>,
    /// LSTM: hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
}

impl TrainNetworkArgs {
    fn architecture(&self, kind: ModelKind) -> Architecture {
        match kind {
            ModelKind::Cnn => {
                let d = CnnConfig::default();
                Architecture::Cnn(CnnConfig {
                    embedding_dim: self.dim,
                    filters: self.filters.unwrap_or(d.filters),
                    dropout: self.dropout.unwrap_or(d.dropout),
                    include_like: self.include_like,
                    max_len: self.max_len,
                    ..d
                })
            }
            ModelKind::Lstm => {
                let d = LstmConfig::default();
                Architecture::Lstm(LstmConfig {
                    embedding_dim: self.dim,
                    hidden: self.hidden.unwrap_or(d.hidden),
                    dropout: self.dropout.unwrap_or(d.dropout),
                    include_like: self.include_like,
                    max_len: self.max_len,
                })
            }
        }
    }

    fn train_config(&self, kind: ModelKind) -> TrainConfig {
        let d = TrainConfig::for_kind(kind);
        TrainConfig {
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            optimizer: self.lr.map_or(d.optimizer, OptimizerConfig::adam),
            l2: self.l2.unwrap_or(d.l2),
            patience: match self.patience {
                Some(0) => None,
                Some(p) => Some(p),
                None => d.patience,
            },
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let table = load_glove(path, dim).with_context(|| format!("loading {}", path.display()))?;
    if table.skipped() > 0 {
        warn!("skipped {} malformed embedding lines", table.skipped());
    }
    Ok(table)
}

pub fn train_network(kind: ModelKind, args: &TrainNetworkArgs) -> Result<()> {
    let (tr, va, te) = args.split.load(args.include_like)?;
    let table = load_embeddings(&args.embeddings, args.dim)?;
    let mut arch = args.architecture(kind);
    arch.set_max_len(longest_post(&tr, args.max_len));
    arch.validate()?;
    let prep = |c: &Corpus| prepare_examples(c, &table, arch.max_len(), args.include_like);
    let (train_ex, val_ex, test_ex) = (prep(&tr)?, prep(&va)?, prep(&te)?);
    let cfg = args.train_config(kind);
    info!("training {} on {} posts for up to {} epochs", kind.name(), train_ex.len(), cfg.epochs);
    let model = train(&arch, &train_ex, &val_ex, &cfg)?;

    let dir = &args.artifacts.artifacts;
    let stem = match kind {
        ModelKind::Cnn => CNN_STEM,
        ModelKind::Lstm => RNN_STEM,
    };
    model.save(dir, stem)?;
    fs::write(dir.join(format!("{stem}_history.csv")), model.history.to_csv())?;
    let embeddings = fs::canonicalize(&args.embeddings).unwrap_or_else(|_| args.embeddings.clone());
    let manifest = Manifest::new(embeddings, args.dim);
    if let Ok(old) = Manifest::load(dir) {
        if old != manifest {
            warn!("replacing manifest that pointed at {}", old.embeddings.display());
        }
    }
    manifest.save(dir)?;

    let test = if test_ex.is_empty() { None } else { Some(model.evaluate(&test_ex)?) };
    print_json(&json!({
        "model": kind.name(),
        "train_posts": train_ex.len(),
        "validation_posts": val_ex.len(),
        "test_posts": test_ex.len(),
        "epochs_run": model.history.epochs.len().saturating_sub(1),
        "best_epoch": model.history.best_epoch,
        "stopped_early": model.history.stopped_early,
        "initial_train_loss": model.history.initial_train_loss(),
        "final_train_loss": model.history.final_train_loss(),
        "test": test,
    }))
}

#[derive(Debug, Args)]
pub struct FitEnsembleArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Feature blocks, e.g. `avg+emotions` or `cnn+rnn+emotions`.
    #[arg(long, default_value = "avg+emotions")]
    pub features: FeatureSet,
}

pub fn fit_ensemble_cmd(args: &FitEnsembleArgs) -> Result<()> {
    let mut predictor = load_predictor(&args.artifacts.artifacts)?;
    predictor.ensemble = None;
    let (tr, _, te) = args.split.load(predictor.cnn.architecture.include_like())?;
    let (comps, targets) = ensemble_data(&predictor, &tr)?;
    let model = fit_ensemble(&comps, &targets, args.features.clone())?;
    model.save(&args.artifacts.artifacts.join(ENSEMBLE_FILE))?;

    let test = if te.is_empty() {
        None
    } else {
        let (tc, ty) = ensemble_data(&predictor, &te)?;
        let predicted = tc
            .iter()
            .map(|c| model.predict_final(c).map(|d| d.into_weights()))
            .collect::<reactmine::Result<Vec<_>>>()?;
        Some(reactmine::models::metrics(&predicted, &ty)?)
    };
    print_json(&json!({
        "features": model.features.to_string(),
        "samples": model.samples,
        "ridge": model.ridge,
        "training_sse": model.training_sse,
        "test": test,
    }))
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Regression feature sets to compare; repeatable. Defaults to emotions
    /// combined with each network output.
    #[arg(long)]
    pub features: Vec<FeatureSet>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: TableFormat,
}

pub const DEFAULT_COMPARISON: [&str; 4] = ["emotions+cnn", "emotions+rnn", "emotions+avg", "emotions+cnn+rnn"];

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let predictor = load_predictor(&args.artifacts.artifacts)?;
    let (tr, _, te) = args.split.load(predictor.cnn.architecture.include_like())?;
    if te.is_empty() {
        bail!("the test split is empty");
    }
    let sets = if args.features.is_empty() {
        DEFAULT_COMPARISON.iter().map(|s| s.parse()).collect::<reactmine::Result<Vec<_>>>()?
    } else {
        args.features.clone()
    };
    let train_data = ensemble_data(&predictor, &tr)?;
    let test_data = ensemble_data(&predictor, &te)?;
    let rows = compare_models((&train_data.0, &train_data.1), (&test_data.0, &test_data.1), &sets)?;
    match args.format {
        TableFormat::Json => print_json(&rows),
        TableFormat::Csv => {
            println!("model,posts,misclass_rate,true_mse,mean_cross_entropy");
            for r in &rows {
                let m = &r.metrics;
                println!("{},{},{:.6},{:.6},{:.6}", r.model, m.posts, m.misclass_rate, m.true_mse, m.mean_cross_entropy);
            }
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Post message.
    #[arg(long)]
    pub text: String,
    /// Comments, one per line.
    #[arg(long)]
    pub comments_file: Option<PathBuf>,
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let predictor = load_predictor(&args.artifacts.artifacts)?;
    let comments: Vec<String> = match &args.comments_file {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    print_json(&predictor.predict(&args.text, &comments)?)
}

pub fn load_predictor(dir: &Path) -> Result<Predictor> {
    Predictor::load(dir).with_context(|| format!("loading artifacts from {}", dir.display()))
}
