use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use super::network::{is_weight, Architecture, ModelKind};
use crate::dataset::{argmax, reaction_distribution, split, Corpus, ReactionDistribution};
use crate::error::{Error, Result};
use crate::numerics::{Optimizer, OptimizerConfig, Params, Tensor};
use crate::textprep::word_tokens;

/// One embedded post with its target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    /// `n x dim`, only the first `valid` rows are meaningful.
    pub input: Tensor,
    pub valid: usize,
    pub target: Vec<f64>,
}

/// Embeds the message of every post. Posts without any counted reaction
/// are skipped.
pub fn prepare_examples(
    corpus: &Corpus,
    table: &EmbeddingTable,
    max_len: usize,
    include_like: bool,
) -> Result<Vec<Example>> {
    let mut skipped = 0;
    let mut out = Vec::with_capacity(corpus.len());
    for post in corpus.iter() {
        let target = match reaction_distribution(post, include_like) {
            Ok(d) => d.into_weights(),
            Err(Error::DegenerateDistribution) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let tokens = word_tokens(&post.message);
        let rows = tokens.len().clamp(1, max_len);
        let (input, valid) = table.embed_and_pad(&tokens, rows)?;
        out.push(Example {
            id: post.id.clone(),
            input,
            valid,
            target,
        });
    }
    if skipped > 0 {
        log::info!("skipped {skipped} posts without reactions");
    }
    Ok(out)
}

/// Longest message in tokens, capped at `cap`.
pub fn longest_post(corpus: &Corpus, cap: usize) -> usize {
    corpus
        .iter()
        .map(|p| word_tokens(&p.message).len())
        .max()
        .unwrap_or(1)
        .clamp(1, cap.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    /// Coefficient of the squared-norm penalty on weight matrices.
    pub l2: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        TrainConfig {
            batch_size: match kind {
                ModelKind::Cnn => 16,
                ModelKind::Lstm => 100,
            },
            epochs: 150,
            optimizer: OptimizerConfig::default(),
            l2: 1e-3,
            patience: Some(20),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub posts: usize,
    pub misclass_rate: f64,
    /// Mean over posts and classes of the squared difference.
    pub true_mse: f64,
    pub mean_cross_entropy: f64,
}

/// Compares predicted distributions with targets.
pub fn metrics(predicted: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Metrics> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("no posts to evaluate"));
    }
    if predicted.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", predicted.len(), targets.len())));
    }
    let (mut wrong, mut sq, mut ce, mut cells) = (0usize, 0.0, 0.0, 0usize);
    for (p, t) in predicted.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::Shape(format!("prediction of {} for target of {}", p.len(), t.len())));
        }
        if argmax(p) != argmax(t) {
            wrong += 1;
        }
        sq += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        cells += p.len();
        ce -= p
            .iter()
            .zip(t)
            .filter(|(_, b)| **b > 0.0)
            .map(|(a, b)| b * a.max(f64::MIN_POSITIVE).ln())
            .sum::<f64>();
    }
    let n = predicted.len() as f64;
    Ok(Metrics {
        posts: predicted.len(),
        misclass_rate: wrong as f64 / n,
        true_mse: sq / cells as f64,
        mean_cross_entropy: ce / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean soft cross-entropy on the training set, evaluation mode.
    pub train_loss: f64,
    pub train_misclass: f64,
    pub val_loss: Option<f64>,
    pub val_misclass: Option<f64>,
    /// Squared-norm penalty at the end of the epoch (already scaled).
    pub penalty: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn initial_train_loss(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.train_loss)
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.train_loss)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("epoch,train_loss,train_misclass,val_loss,val_misclass,penalty\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                r.train_misclass,
                opt(r.val_loss),
                opt(r.val_misclass),
                r.penalty
            ));
        }
        s
    }
}

/// A network with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub architecture: Architecture,
    pub params: Params,
    pub history: History,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    architecture: Architecture,
    history: History,
}

impl TrainedModel {
    pub fn new(architecture: Architecture, params: Params) -> Result<Self> {
        architecture.check_params(&params)?;
        Ok(TrainedModel {
            architecture,
            params,
            history: History::default(),
        })
    }

    pub fn predict(&self, embedded: &Tensor, valid: usize) -> Result<ReactionDistribution> {
        self.architecture.forward(&self.params, embedded, valid)
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S], table: &EmbeddingTable) -> Result<ReactionDistribution> {
        let rows = tokens.len().clamp(1, self.architecture.max_len());
        let (x, valid) = table.embed_and_pad(tokens, rows)?;
        self.predict(&x, valid)
    }

    pub fn predict_text(&self, text: &str, table: &EmbeddingTable) -> Result<ReactionDistribution> {
        self.predict_tokens(&word_tokens(text), table)
    }

    pub fn predict_examples(&self, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
        examples
            .par_iter()
            .map(|e| self.predict(&e.input, e.valid).map(ReactionDistribution::into_weights))
            .collect()
    }

    pub fn evaluate(&self, examples: &[Example]) -> Result<Metrics> {
        let predicted = self.predict_examples(examples)?;
        let targets: Vec<Vec<f64>> = examples.iter().map(|e| e.target.clone()).collect();
        metrics(&predicted, &targets)
    }

    fn paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
        (dir.join(format!("{stem}.ckpt")), dir.join(format!("{stem}.json")))
    }

    /// Writes `<stem>.ckpt` and the `<stem>.json` sidecar into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (ckpt, json) = Self::paths(dir, stem);
        self.params.save(&ckpt)?;
        let sidecar = Sidecar {
            format_version: 1,
            architecture: self.architecture.clone(),
            history: self.history.clone(),
        };
        fs::write(&json, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let (ckpt, json) = Self::paths(dir, stem);
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.format_version != 1 {
            return Err(Error::Checkpoint(format!("unsupported sidecar version {}", sidecar.format_version)));
        }
        let params = Params::load(&ckpt)?;
        let mut model = TrainedModel::new(sidecar.architecture, params)?;
        model.history = sidecar.history;
        Ok(model)
    }
}

fn penalty(params: &Params, l2: f64) -> f64 {
    params
        .iter()
        .filter(|(n, _)| is_weight(n))
        .map(|(_, t)| l2 * t.sum_squares())
        .sum()
}

fn example_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn mean_loss(model: &TrainedModel, examples: &[Example]) -> Result<(f64, f64)> {
    let m = model.evaluate(examples)?;
    Ok((m.mean_cross_entropy, m.misclass_rate))
}

/// Minibatch training of mean soft cross-entropy plus the L2 penalty.
///
/// Epoch 0 in the history is the untrained network. With validation data,
/// the returned weights are those of the best validation epoch.
pub fn train(
    architecture: &Architecture,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut model = TrainedModel::new(architecture.clone(), architecture.init_params(cfg.seed)?)?;
    let mut opt = Optimizer::new(cfg.optimizer, &model.params);
    let mut history = History::default();
    let record = |model: &TrainedModel, epoch: usize| -> Result<EpochRecord> {
        let (train_loss, train_misclass) = mean_loss(model, train_set)?;
        let val = if val_set.is_empty() {
            None
        } else {
            Some(mean_loss(model, val_set)?)
        };
        Ok(EpochRecord {
            epoch,
            train_loss,
            train_misclass,
            val_loss: val.map(|v| v.0),
            val_misclass: val.map(|v| v.1),
            penalty: penalty(&model.params, cfg.l2),
        })
    };
    let first = record(&model, 0)?;
    let score = |r: &EpochRecord| r.val_loss.unwrap_or(r.train_loss);
    let mut best = (score(&first), model.params.clone(), 0usize);
    history.epochs.push(first);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let params = &model.params;
            let per_example: Vec<(f64, Vec<Tensor>)> = batch
                .par_iter()
                .map(|&i| {
                    let e = &train_set[i];
                    let mut rng = ChaCha8Rng::seed_from_u64(example_seed(cfg.seed, epoch, i));
                    architecture.loss_and_grad(params, &e.input, e.valid, &e.target, Some(&mut rng))
                })
                .collect::<Result<_>>()?;
            let mut grads = params.zeros_like();
            for (_, g) in &per_example {
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.add_assign(gi);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for (i, acc) in grads.iter_mut().enumerate() {
                acc.scale(inv);
                if is_weight(params.name(i)) && cfg.l2 > 0.0 {
                    for (g, w) in acc.data_mut().iter_mut().zip(params.tensor(i).data()) {
                        *g += 2.0 * cfg.l2 * w;
                    }
                }
            }
            opt.step(&mut model.params, &grads)?;
        }
        if model.params.tensors().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("parameters after update"));
        }
        let rec = record(&model, epoch)?;
        log::debug!("{} epoch {epoch}: train {:.4} val {:?}", architecture.kind().name(), rec.train_loss, rec.val_loss);
        let s = score(&rec);
        history.epochs.push(rec);
        if s < best.0 {
            best = (s, model.params.clone(), epoch);
        } else if cfg.patience.is_some_and(|p| epoch - best.2 >= p) {
            history.stopped_early = true;
            break;
        }
    }
    history.best_epoch = best.2;
    if !val_set.is_empty() {
        model.params = best.1;
    }
    model.history = history;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub runs: Vec<Metrics>,
    pub mean: Metrics,
    /// Sample standard deviation across runs.
    pub std: Metrics,
}

pub fn aggregate(runs: &[Metrics]) -> Result<CvSummary> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least two runs".into()));
    }
    let n = runs.len() as f64;
    let stat = |f: fn(&Metrics) -> f64| {
        let mean = runs.iter().map(f).sum::<f64>() / n;
        let var = runs.iter().map(|m| (f(m) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    };
    let (mr, sr) = stat(|m| m.misclass_rate);
    let (mm, sm) = stat(|m| m.true_mse);
    let (mc, sc) = stat(|m| m.mean_cross_entropy);
    let posts = runs.iter().map(|m| m.posts).sum::<usize>() / runs.len();
    Ok(CvSummary {
        runs: runs.to_vec(),
        mean: Metrics {
            posts,
            misclass_rate: mr,
            true_mse: mm,
            mean_cross_entropy: mc,
        },
        std: Metrics {
            posts,
            misclass_rate: sr,
            true_mse: sm,
            mean_cross_entropy: sc,
        },
    })
}

/// Independent seeded splits and trainings, evaluated on each test part.
pub fn cross_validate(
    architecture: &Architecture,
    corpus: &Corpus,
    table: &EmbeddingTable,
    cfg: &TrainConfig,
    runs: usize,
    fractions: (f64, f64, f64),
) -> Result<CvSummary> {
    if runs < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least two runs".into()));
    }
    let mut results = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = cfg.seed.wrapping_add(r as u64);
        let (tr, va, te) = split(corpus, fractions, seed)?;
        let mut arch = architecture.clone();
        arch.set_max_len(longest_post(&tr, architecture.max_len()));
        let include_like = arch.include_like();
        let prep = |c: &Corpus| prepare_examples(c, table, arch.max_len(), include_like);
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let model = train(&arch, &prep(&tr)?, &prep(&va)?, &run_cfg)?;
        let m = model.evaluate(&prep(&te)?)?;
        log::info!("{} run {r}: misclassification {:.4}", arch.kind().name(), m.misclass_rate);
        results.push(m);
    }
    aggregate(&results)
}
