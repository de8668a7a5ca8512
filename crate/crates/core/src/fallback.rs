//! TF-IDF features and a one-vs-all linear SVM that annotates sentences the
//! lexicon cannot, plus precision-recall evaluation of the classifier.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Emotion, EmotionVector};
use crate::textprep::TokenSequence;

/// Sparse vector as `(index, value)` pairs with strictly increasing indices.
pub type SparseVector = Vec<(usize, f64)>;

/// Per-sentence binary emotion labels in canonical order.
pub type EmotionLabels = [bool; 8];

pub fn labels_of(ev: &EmotionVector) -> EmotionLabels {
    ev.0.map(|x| x > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    terms: Vec<String>,
    idf: Vec<f64>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfIdfModel {
    /// Builds the vocabulary (first-seen order) and smoothed idf
    /// `ln((1 + n) / (1 + df)) + 1` from training sentences.
    pub fn fit(sentences: &[TokenSequence]) -> Result<Self> {
        if sentences.iter().all(TokenSequence::is_empty) {
            return Err(Error::EmptyInput("tf-idf needs at least one non-empty sentence"));
        }
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut terms = Vec::new();
        let mut df: Vec<usize> = Vec::new();
        for s in sentences {
            let mut seen = Vec::new();
            for t in s.tokens() {
                let id = *index.entry(t.clone()).or_insert_with(|| {
                    terms.push(t.clone());
                    df.push(0);
                    terms.len() - 1
                });
                if !seen.contains(&id) {
                    seen.push(id);
                    df[id] += 1;
                }
            }
        }
        let n = sentences.len();
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(TfIdfModel {
            terms,
            idf,
            n_docs: n,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i])
    }

    /// Raw-count tf times idf, L2-normalized. Out-of-vocabulary tokens are
    /// ignored; no known token gives the zero vector.
    pub fn vectorize(&self, ts: &TokenSequence) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in ts.tokens() {
            if let Some(i) = self.term_index(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVector = counts.into_iter().map(|(i, tf)| (i, tf * self.idf[i])).collect();
        v.sort_unstable_by_key(|&(i, _)| i);
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|(_, x)| *x /= norm);
        }
        v
    }

    fn rebuild_index(&mut self) {
        self.index = self.terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; decays as `eta0 / (1 + lambda * eta0 * t)`.
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 100,
            eta0: 0.5,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Constant-negative model for an emotion without both label classes.
    pub stub: bool,
    /// Regularized hinge objective after each epoch.
    pub objective: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, x: &[(usize, f64)]) -> f64 {
        if self.stub {
            return self.bias;
        }
        x.iter().map(|&(i, v)| self.weights[i] * v).sum::<f64>() + self.bias
    }
}

fn hinge_objective(w: &[f64], b: f64, x: &[SparseVector], y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let s: f64 = xi.iter().map(|&(j, v)| w[j] * v).sum::<f64>() + b;
            (1.0 - yi * s).max(0.0)
        })
        .sum();
    reg + loss / x.len() as f64
}

/// Trains one binary linear SVM on `J = lambda/2 |w|^2 + mean hinge` with
/// shuffled stochastic subgradient epochs. An epoch that raises `J` is rolled
/// back and the step size halved, so the recorded objective never increases.
pub fn train_binary_svm(x: &[SparseVector], labels: &[bool], dim: usize, cfg: &SvmConfig) -> LinearModel {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return LinearModel {
            weights: vec![0.0; dim],
            bias: -1.0,
            stub: true,
            objective: Vec::new(),
        };
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    // w = scale * v keeps the shrink step O(1) for sparse inputs.
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut t = 0.0;
    let mut eta0 = cfg.eta0;
    let mut current = hinge_objective(&v, bias, x, &y, cfg.lambda);
    let mut objective = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let snapshot = (v.clone(), scale, bias, t);
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = eta0 / (1.0 + cfg.lambda * eta0 * t);
            let margin = y[i] * (scale * x[i].iter().map(|&(j, xv)| v[j] * xv).sum::<f64>() + bias);
            scale *= 1.0 - eta * cfg.lambda;
            if margin < 1.0 {
                for &(j, xv) in &x[i] {
                    v[j] += eta * y[i] * xv / scale;
                }
                bias += eta * y[i];
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            t += 1.0;
        }
        let w: Vec<f64> = v.iter().map(|&a| a * scale).collect();
        let next = hinge_objective(&w, bias, x, &y, cfg.lambda);
        if next <= current {
            current = next;
            v = w;
            scale = 1.0;
        } else {
            (v, scale, bias, t) = snapshot;
            eta0 *= 0.5;
        }
        objective.push(current);
    }
    let weights = v.iter().map(|&a| a * scale).collect();
    LinearModel {
        weights,
        bias,
        stub: false,
        objective,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmEnsemble {
    pub models: Vec<LinearModel>,
    pub config: SvmConfig,
}

/// One binary model per emotion. Emotions lacking positive or negative
/// examples get a constant-negative stub.
pub fn train_ova_svm(x: &[SparseVector], y: &[EmotionLabels], dim: usize, cfg: &SvmConfig) -> Result<SvmEnsemble> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} inputs but {} label rows", x.len(), y.len())));
    }
    if let Some(bad) = x.iter().flatten().find(|(i, _)| *i >= dim) {
        return Err(Error::Shape(format!("feature index {} outside dimension {dim}", bad.0)));
    }
    let models = Emotion::ALL
        .par_iter()
        .map(|e| {
            let labels: Vec<bool> = y.iter().map(|l| l[e.index()]).collect();
            let m = train_binary_svm(x, &labels, dim, cfg);
            if m.stub {
                log::warn!("emotion {e}: labels are single-class, using a constant-negative model");
            }
            m
        })
        .collect();
    Ok(SvmEnsemble { models, config: *cfg })
}

impl SvmEnsemble {
    pub fn scores(&self, x: &[(usize, f64)]) -> [f64; 8] {
        std::array::from_fn(|k| self.models[k].score(x))
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> EmotionVector {
        EmotionVector(self.scores(x).map(|s| if s > 0.0 { 1.0 } else { 0.0 }))
    }
}

const FORMAT_VERSION: u32 = 1;

/// TF-IDF featurizer plus the eight per-emotion SVMs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackClassifier {
    pub format_version: u32,
    pub tfidf: TfIdfModel,
    pub svm: SvmEnsemble,
}

impl FallbackClassifier {
    pub fn train(sentences: &[TokenSequence], labels: &[EmotionLabels], cfg: &SvmConfig) -> Result<Self> {
        let tfidf = TfIdfModel::fit(sentences)?;
        let x: Vec<SparseVector> = sentences.iter().map(|s| tfidf.vectorize(s)).collect();
        let svm = train_ova_svm(&x, labels, tfidf.dim(), cfg)?;
        Ok(FallbackClassifier {
            format_version: FORMAT_VERSION,
            tfidf,
            svm,
        })
    }

    /// Binary emotion vector: emotion `e` is set iff its model scores > 0.
    pub fn predict_emotions(&self, ts: &TokenSequence) -> EmotionVector {
        self.svm.predict(&self.tfidf.vectorize(ts))
    }

    pub fn scores(&self, ts: &TokenSequence) -> [f64; 8] {
        self.svm.scores(&self.tfidf.vectorize(ts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut model: FallbackClassifier = serde_json::from_slice(&bytes)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported fallback model version {}",
                model.format_version
            )));
        }
        model.tfidf.rebuild_index();
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub emotion: Emotion,
    pub positives: usize,
    /// `(recall, precision)` at each distinct score threshold, highest first.
    pub points: Vec<(f64, f64)>,
    /// `None` when the test set has no positive example.
    pub average_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub curves: Vec<PrCurve>,
    /// Mean AP over emotions with at least one positive test example.
    pub macro_average_precision: f64,
}

/// Precision-recall points and step-wise average precision
/// `sum_k (R_k - R_{k-1}) P_k`, sweeping the threshold over all scores.
pub fn precision_recall(scores: &[f64], labels: &[bool]) -> (Vec<(f64, f64)>, Option<f64>) {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return (Vec::new(), None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push((recall, precision));
    }
    (points, Some(ap))
}

pub fn evaluate_pr(svm: &SvmEnsemble, x: &[SparseVector], y: &[EmotionLabels]) -> Result<PrReport> {
    if x.is_empty() {
        return Err(Error::EmptyInput("precision-recall needs a non-empty test set"));
    }
    let scores: Vec<[f64; 8]> = x.iter().map(|xi| svm.scores(xi)).collect();
    let curves: Vec<PrCurve> = Emotion::ALL
        .iter()
        .map(|&e| {
            let s: Vec<f64> = scores.iter().map(|r| r[e.index()]).collect();
            let l: Vec<bool> = y.iter().map(|r| r[e.index()]).collect();
            let (points, average_precision) = precision_recall(&s, &l);
            PrCurve {
                emotion: e,
                positives: l.iter().filter(|&&b| b).count(),
                points,
                average_precision,
            }
        })
        .collect();
    let aps: Vec<f64> = curves.iter().filter_map(|c| c.average_precision).collect();
    let macro_average_precision = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    Ok(PrReport {
        curves,
        macro_average_precision,
    })
}

/// Trains on a seeded random share of the sentences and reports
/// precision-recall on the held-out `test_fraction`.
pub fn train_and_evaluate(
    sentences: &[TokenSequence],
    labels: &[EmotionLabels],
    test_fraction: f64,
    seed: u64,
    cfg: &SvmConfig,
) -> Result<(FallbackClassifier, PrReport)> {
    if sentences.len() != labels.len() {
        return Err(Error::Shape(format!("{} sentences for {} label rows", sentences.len(), labels.len())));
    }
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(Error::InvalidFractions(format!("test fraction {test_fraction}")));
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_fraction * sentences.len() as f64).round() as usize;
    if n_test == 0 || n_test == sentences.len() {
        return Err(Error::CorpusTooSmall { size: sentences.len() });
    }
    let (test, train) = order.split_at(n_test);
    let pick = |idx: &[usize]| -> (Vec<TokenSequence>, Vec<EmotionLabels>) {
        idx.iter().map(|&i| (sentences[i].clone(), labels[i])).unzip()
    };
    let (train_s, train_l) = pick(train);
    let (test_s, test_l) = pick(test);
    let model = FallbackClassifier::train(&train_s, &train_l, cfg)?;
    let x: Vec<SparseVector> = test_s.iter().map(|s| model.tfidf.vectorize(s)).collect();
    let report = evaluate_pr(&model.svm, &x, &test_l)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::tagged(words.iter().copied())
    }

    #[test]
    fn idf_formula() {
        let docs = [seq(&["a", "b"]), seq(&["a"]), seq(&["a", "c"])];
        let m = TfIdfModel::fit(&docs).unwrap();
        assert_eq!(m.idf("a"), Some(1.0));
        assert!((m.idf("b").unwrap() - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert_eq!(m.idf("zzz"), None);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.term_index("c"), Some(2));
    }

    #[test]
    fn fit_rejects_all_empty() {
        assert!(TfIdfModel::fit(&[TokenSequence::default()]).is_err());
        assert!(TfIdfModel::fit(&[]).is_err());
    }

    #[test]
    fn vectorize_examples() {
        let docs = [seq(&["a", "b"]), seq(&["a"]), seq(&["a", "c"])];
        let m = TfIdfModel::fit(&docs).unwrap();
        assert_eq!(m.vectorize(&seq(&["b"])), vec![(1, 1.0)]);
        assert!(m.vectorize(&seq(&["x", "y"])).is_empty());
        // tf doubles for a repeated token: weights (2*1, 1*(ln 2 + 1)) before normalization
        let v = m.vectorize(&seq(&["a", "a", "b", "oov"]));
        let (wa, wb) = (2.0, 2f64.ln() + 1.0);
        let n = (wa * wa + wb * wb).sqrt();
        assert_eq!(v.len(), 2);
        assert!((v[0].1 - wa / n).abs() < 1e-15);
        assert!((v[1].1 - wb / n).abs() < 1e-15);
    }

    fn toy_separable() -> (Vec<SparseVector>, Vec<bool>) {
        // positives have x0 > x1
        let pts = [
            (1.0, 0.1, true),
            (0.9, 0.3, true),
            (0.8, 0.0, true),
            (0.7, 0.2, true),
            (0.1, 1.0, false),
            (0.2, 0.8, false),
            (0.0, 0.9, false),
            (0.3, 0.7, false),
        ];
        let x = pts.iter().map(|&(a, b, _)| vec![(0, a), (1, b)]).collect();
        let y = pts.iter().map(|&(_, _, l)| l).collect();
        (x, y)
    }

    #[test]
    fn separable_toy_is_fit_perfectly() {
        let (x, y) = toy_separable();
        let m = train_binary_svm(&x, &y, 2, &SvmConfig::default());
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.score(xi) > 0.0, yi);
        }
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = toy_separable();
        let m = train_binary_svm(&x, &y, 2, &SvmConfig { epochs: 60, ..Default::default() });
        assert_eq!(m.objective.len(), 60);
        assert!(m.objective.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = toy_separable();
        let a = train_binary_svm(&x, &y, 2, &SvmConfig::default());
        let b = train_binary_svm(&x, &y, 2, &SvmConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_labels_give_stub() {
        let (x, _) = toy_separable();
        let y = vec![[false; 8]; x.len()];
        let svm = train_ova_svm(&x, &y, 2, &SvmConfig::default()).unwrap();
        assert!(svm.models.iter().all(|m| m.stub));
        assert_eq!(svm.predict(&x[0]), EmotionVector::ZERO);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let x = vec![vec![(5, 1.0)]];
        assert!(matches!(train_ova_svm(&x, &[[false; 8]], 2, &SvmConfig::default()), Err(Error::Shape(_))));
        assert!(matches!(train_ova_svm(&x, &[], 8, &SvmConfig::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_input_predicts_sign_of_bias() {
        let (x, y) = toy_separable();
        let labels: Vec<EmotionLabels> = y.iter().map(|&l| [l, !l, l, false, l, !l, l, !l]).collect();
        let svm = train_ova_svm(&x, &labels, 2, &SvmConfig::default()).unwrap();
        let pred = svm.predict(&Vec::new());
        for (k, m) in svm.models.iter().enumerate() {
            assert_eq!(pred.0[k] == 1.0, m.bias > 0.0);
        }
    }

    #[test]
    fn prediction_is_positive_scale_invariant() {
        let (x, y) = toy_separable();
        let labels: Vec<EmotionLabels> = y.iter().map(|&l| [l, !l, l, l, !l, l, !l, l]).collect();
        let svm = train_ova_svm(&x, &labels, 2, &SvmConfig::default()).unwrap();
        // bias-free direction check: sign of w.x is unchanged by scaling x
        for m in &svm.models {
            for xi in &x {
                let s = m.score(xi) - m.bias;
                let scaled: SparseVector = xi.iter().map(|&(i, v)| (i, 3.5 * v)).collect();
                let s2 = m.score(&scaled) - m.bias;
                assert_eq!(s > 0.0, s2 > 0.0);
            }
        }
    }

    #[test]
    fn classifier_memorizes_separable_sentences() {
        let sents = [seq(&["love", "great"]), seq(&["hate", "awful"]), seq(&["great", "day"]), seq(&["awful", "day"])];
        let joy = [true, false, true, false];
        let labels: Vec<EmotionLabels> = joy.iter().map(|&j| [!j, false, !j, false, j, false, false, false]).collect();
        let fb = FallbackClassifier::train(&sents, &labels, &SvmConfig::default()).unwrap();
        for (s, l) in sents.iter().zip(&labels) {
            assert_eq!(labels_of(&fb.predict_emotions(s)), *l);
        }
        let f = tempfile::NamedTempFile::new().unwrap();
        fb.save(f.path()).unwrap();
        let back = FallbackClassifier::load(f.path()).unwrap();
        assert_eq!(back.scores(&sents[0]), fb.scores(&sents[0]));
    }

    #[test]
    fn perfect_scores_have_unit_ap() {
        let (pts, ap) = precision_recall(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]);
        assert_eq!(ap, Some(1.0));
        assert_eq!(pts.last(), Some(&(1.0, 0.5)));
        assert_eq!(precision_recall(&[0.1], &[false]).1, None);
    }

    #[test]
    fn ap_hand_case() {
        // ranking: T F T F -> AP = 0.5*1 + 0.5*(2/3)
        let (_, ap) = precision_recall(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]);
        assert!((ap.unwrap() - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        // tied scores form one threshold
        let (pts, ap) = precision_recall(&[0.5, 0.5], &[true, false]);
        assert_eq!(pts, vec![(1.0, 0.5)]);
        assert_eq!(ap, Some(0.5));
    }

    #[test]
    fn random_scores_ap_near_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 20_000;
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (_, ap) = precision_recall(&scores, &labels);
        assert!((ap.unwrap() - 0.5).abs() < 0.02, "{ap:?}");
    }

    #[test]
    fn evaluate_perfect_ensemble() {
        let (x, y) = toy_separable();
        let labels: Vec<EmotionLabels> = y.iter().map(|&l| [l; 8]).collect();
        let svm = train_ova_svm(&x, &labels, 2, &SvmConfig::default()).unwrap();
        let report = evaluate_pr(&svm, &x, &labels).unwrap();
        assert_eq!(report.macro_average_precision, 1.0);
        assert!(evaluate_pr(&svm, &[], &[]).is_err());
    }
}
