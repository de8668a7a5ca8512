//! Loading trained artifacts and running the full prediction pipeline:
//! both networks, their average, the mined emotions and the regression.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{reaction_distribution, Corpus, Post, Reaction, ReactionDistribution};
use crate::ensemble::{fit_regression, Components, FeatureSet, RegressionModel};
use crate::error::{Error, Result};
use crate::fallback::FallbackClassifier;
use crate::lexicon::{Emotion, EmotionVector, Lexicon};
use crate::miner::{highlight, EmotionMiner, MinerOptions};
use crate::models::{load_glove, metrics, EmbeddingTable, Metrics, TrainedModel};
use crate::textprep::{self, WordLists};

pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const FALLBACK_FILE: &str = "fallback.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CNN_STEM: &str = "cnn";
pub const RNN_STEM: &str = "rnn";

/// Points at inputs that live outside the artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub embeddings: PathBuf,
    pub embedding_dim: usize,
}

impl Manifest {
    pub fn new(embeddings: PathBuf, embedding_dim: usize) -> Self {
        Manifest {
            format_version: 1,
            embeddings,
            embedding_dim,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Reaction ratios in canonical order; `like` only in the six-class setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionRatios {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub like: Option<f64>,
    pub love: f64,
    pub wow: f64,
    pub haha: f64,
    pub sad: f64,
    pub angry: f64,
}

impl From<&ReactionDistribution> for ReactionRatios {
    fn from(d: &ReactionDistribution) -> Self {
        let get = |r| d.get(r).unwrap_or(0.0);
        ReactionRatios {
            like: d.get(Reaction::Like),
            love: get(Reaction::Love),
            wow: get(Reaction::Wow),
            haha: get(Reaction::Haha),
            sad: get(Reaction::Sad),
            angry: get(Reaction::Angry),
        }
    }
}

impl ReactionRatios {
    pub fn values(&self) -> Vec<f64> {
        self.like
            .into_iter()
            .chain([self.love, self.wow, self.haha, self.sad, self.angry])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionRatios {
    pub anger: f64,
    pub anticipation: f64,
    pub disgust: f64,
    pub fear: f64,
    pub joy: f64,
    pub sadness: f64,
    pub surprise: f64,
    pub trust: f64,
}

impl From<&EmotionVector> for EmotionRatios {
    fn from(v: &EmotionVector) -> Self {
        let [anger, anticipation, disgust, fear, joy, sadness, surprise, trust] = *v.as_array();
        EmotionRatios {
            anger,
            anticipation,
            disgust,
            fear,
            joy,
            sadness,
            surprise,
            trust,
        }
    }
}

impl EmotionRatios {
    pub fn values(&self) -> [f64; 8] {
        [
            self.anger,
            self.anticipation,
            self.disgust,
            self.fear,
            self.joy,
            self.sadness,
            self.surprise,
            self.trust,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenHighlight {
    pub token: String,
    pub emotions: Vec<Emotion>,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRatios {
    pub cnn: ReactionRatios,
    pub rnn: ReactionRatios,
    pub averaged: ReactionRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub reactions: ReactionRatios,
    pub emotions: EmotionRatios,
    pub highlights: Vec<TokenHighlight>,
    pub components: ComponentRatios,
}

/// Everything needed for inference, loaded once and shared read-only.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub lexicon: Lexicon,
    pub lists: WordLists,
    pub fallback: Option<FallbackClassifier>,
    pub embeddings: EmbeddingTable,
    pub cnn: TrainedModel,
    pub rnn: TrainedModel,
    pub ensemble: Option<RegressionModel>,
    pub miner_options: MinerOptions,
}

fn optional<T>(path: PathBuf, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        load(&path).map(Some)
    } else {
        Ok(None)
    }
}

impl Predictor {
    /// Loads an artifact directory. The fallback classifier and the
    /// regression are optional; without the regression the averaged
    /// network output is returned.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::load(dir)?;
        let embeddings = load_glove(&manifest.embeddings, manifest.embedding_dim)?;
        Predictor::load_with_embeddings(dir, embeddings)
    }

    pub fn load_with_embeddings(dir: &Path, embeddings: EmbeddingTable) -> Result<Self> {
        let predictor = Predictor {
            lexicon: Lexicon::load_emolex(&dir.join(LEXICON_FILE))?,
            lists: WordLists::default(),
            fallback: optional(dir.join(FALLBACK_FILE), FallbackClassifier::load)?,
            embeddings,
            cnn: TrainedModel::load(dir, CNN_STEM)?,
            rnn: TrainedModel::load(dir, RNN_STEM)?,
            ensemble: optional(dir.join(ENSEMBLE_FILE), RegressionModel::load)?,
            miner_options: MinerOptions::default(),
        };
        predictor.check()?;
        Ok(predictor)
    }

    pub fn check(&self) -> Result<()> {
        let dim = self.embeddings.dim();
        for m in [&self.cnn, &self.rnn] {
            if m.architecture.embedding_dim() != dim {
                return Err(Error::Shape(format!(
                    "{} expects {}-d embeddings, table has {dim}",
                    m.architecture.kind().name(),
                    m.architecture.embedding_dim()
                )));
            }
        }
        if self.cnn.architecture.classes() != self.rnn.architecture.classes() {
            return Err(Error::Shape("networks predict different reaction sets".into()));
        }
        if let Some(e) = &self.ensemble {
            if e.classes != self.cnn.architecture.classes() {
                return Err(Error::Shape("regression and networks predict different reaction sets".into()));
            }
        }
        Ok(())
    }

    pub fn miner(&self) -> EmotionMiner<'_> {
        let m = EmotionMiner::new(&self.lexicon, &self.lists).with_options(self.miner_options);
        match &self.fallback {
            Some(fb) => m.with_fallback(fb),
            None => m,
        }
    }

    pub fn components<S: AsRef<str>>(&self, text: &str, comments: &[S]) -> Result<Components> {
        Ok(Components {
            cnn: self.cnn.predict_text(text, &self.embeddings)?,
            rnn: self.rnn.predict_text(text, &self.embeddings)?,
            emotions: self.miner().text_emotions(text, comments),
        })
    }

    pub fn post_components(&self, post: &Post) -> Result<Components> {
        self.components(&post.message, &post.comments)
    }

    pub fn final_distribution(&self, c: &Components) -> Result<ReactionDistribution> {
        match &self.ensemble {
            Some(e) => e.predict_final(c),
            None => c.averaged(),
        }
    }

    pub fn highlights(&self, text: &str) -> Vec<TokenHighlight> {
        textprep::split_sentences(&textprep::preprocess(text))
            .iter()
            .map(|s| textprep::tokenize(s, &self.lists))
            .flat_map(|ts| highlight(&ts, &self.lexicon))
            .map(|h| TokenHighlight {
                token: h.token,
                emotions: h.emotions.emotions().collect(),
                negated: h.negated,
            })
            .collect()
    }

    pub fn predict<S: AsRef<str>>(&self, text: &str, comments: &[S]) -> Result<Prediction> {
        let c = self.components(text, comments)?;
        let averaged = c.averaged()?;
        Ok(Prediction {
            reactions: (&self.final_distribution(&c)?).into(),
            emotions: (&c.emotions).into(),
            highlights: self.highlights(text),
            components: ComponentRatios {
                cnn: (&c.cnn).into(),
                rnn: (&c.rnn).into(),
                averaged: (&averaged).into(),
            },
        })
    }
}

/// Components and targets for every post with a usable target.
pub fn ensemble_data(predictor: &Predictor, corpus: &Corpus) -> Result<(Vec<Components>, Vec<Vec<f64>>)> {
    let include_like = predictor.cnn.architecture.include_like();
    let mut comps = Vec::new();
    let mut targets = Vec::new();
    for post in corpus.iter() {
        let target = match reaction_distribution(post, include_like) {
            Ok(d) => d.into_weights(),
            Err(Error::DegenerateDistribution) => continue,
            Err(e) => return Err(e),
        };
        comps.push(predictor.post_components(post)?);
        targets.push(target);
    }
    if comps.is_empty() {
        return Err(Error::EmptyInput("no posts with reactions"));
    }
    Ok((comps, targets))
}

pub fn fit_ensemble(comps: &[Components], targets: &[Vec<f64>], features: FeatureSet) -> Result<RegressionModel> {
    let x = comps
        .iter()
        .map(|c| c.features(&features))
        .collect::<Result<Vec<_>>>()?;
    fit_regression(&x, targets, features)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub model: String,
    pub metrics: Metrics,
}

/// Test metrics for each network, their average, and one regression per
/// feature set fitted on the training components.
pub fn compare_models(
    train: (&[Components], &[Vec<f64>]),
    test: (&[Components], &[Vec<f64>]),
    feature_sets: &[FeatureSet],
) -> Result<Vec<EvaluationRow>> {
    let (test_c, test_y) = test;
    let collect = |f: &dyn Fn(&Components) -> Result<Vec<f64>>| test_c.iter().map(f).collect::<Result<Vec<_>>>();
    let mut rows = vec![
        EvaluationRow {
            model: "cnn".into(),
            metrics: metrics(&collect(&|c| Ok(c.cnn.weights().to_vec()))?, test_y)?,
        },
        EvaluationRow {
            model: "rnn".into(),
            metrics: metrics(&collect(&|c| Ok(c.rnn.weights().to_vec()))?, test_y)?,
        },
        EvaluationRow {
            model: "avg".into(),
            metrics: metrics(&collect(&|c| c.averaged().map(ReactionDistribution::into_weights))?, test_y)?,
        },
    ];
    for fs in feature_sets {
        let model = fit_ensemble(train.0, train.1, fs.clone())?;
        let predicted = collect(&|c| model.predict_final(c).map(ReactionDistribution::into_weights))?;
        rows.push(EvaluationRow {
            model: format!("regression[{fs}]"),
            metrics: metrics(&predicted, test_y)?,
        });
    }
    Ok(rows)
}
