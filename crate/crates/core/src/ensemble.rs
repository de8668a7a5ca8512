//! Linear re-estimation of reaction ratios from the network outputs and the
//! mined emotion vector.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ReactionDistribution;
use crate::error::{Error, Result};
use crate::lexicon::EmotionVector;

pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Ridge used when there are fewer samples than regression coefficients.
pub const FALLBACK_RIDGE: f64 = 1e-3;

/// Element-wise mean of two distributions, renormalized.
pub fn average_networks(a: &ReactionDistribution, b: &ReactionDistribution) -> Result<ReactionDistribution> {
    if a.weights().len() != b.weights().len() {
        return Err(Error::Shape(format!(
            "averaging {} and {} reaction weights",
            a.weights().len(),
            b.weights().len()
        )));
    }
    let mean: Vec<f64> = a.weights().iter().zip(b.weights()).map(|(x, y)| (x + y) / 2.0).collect();
    let total: f64 = mean.iter().sum();
    ReactionDistribution::new(mean.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Cnn,
    Rnn,
    Avg,
    Emotions,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Cnn => "cnn",
            Feature::Rnn => "rnn",
            Feature::Avg => "avg",
            Feature::Emotions => "emotions",
        }
    }
}

/// Ordered feature blocks, written `avg+emotions` on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet(Vec<Feature>);

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet(vec![Feature::Avg, Feature::Emotions])
    }
}

impl FeatureSet {
    pub fn new(blocks: Vec<Feature>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("feature set is empty".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if blocks[..i].contains(b) {
                return Err(Error::InvalidArgument(format!("feature {} listed twice", b.name())));
            }
        }
        Ok(FeatureSet(blocks))
    }

    pub fn blocks(&self) -> &[Feature] {
        &self.0
    }

    /// Number of regressors, excluding the intercept.
    pub fn width(&self, classes: usize) -> usize {
        self.0
            .iter()
            .map(|f| if *f == Feature::Emotions { 8 } else { classes })
            .sum()
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let blocks = s
            .split(['+', ','])
            .map(|p| match p.trim().to_ascii_lowercase().as_str() {
                "cnn" => Ok(Feature::Cnn),
                "rnn" | "lstm" => Ok(Feature::Rnn),
                "avg" | "averaged" => Ok(Feature::Avg),
                "emotions" | "emotion" => Ok(Feature::Emotions),
                other => Err(Error::InvalidArgument(format!("unknown feature block {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureSet::new(blocks)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|b| b.name()).collect();
        f.write_str(&names.join("+"))
    }
}

/// Per-post inputs to the regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub cnn: ReactionDistribution,
    pub rnn: ReactionDistribution,
    /// Normalized emotion ratios.
    pub emotions: EmotionVector,
}

impl Components {
    pub fn averaged(&self) -> Result<ReactionDistribution> {
        average_networks(&self.cnn, &self.rnn)
    }

    pub fn classes(&self) -> usize {
        self.cnn.weights().len()
    }

    /// Concatenates the requested blocks, without the intercept.
    pub fn features(&self, set: &FeatureSet) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(set.width(self.classes()));
        for block in set.blocks() {
            match block {
                Feature::Cnn => out.extend_from_slice(self.cnn.weights()),
                Feature::Rnn => out.extend_from_slice(self.rnn.weights()),
                Feature::Avg => out.extend_from_slice(self.averaged()?.weights()),
                Feature::Emotions => out.extend_from_slice(self.emotions.as_array()),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub format_version: u32,
    pub features: FeatureSet,
    pub classes: usize,
    /// One row per output: intercept followed by one weight per regressor.
    pub weights: Vec<Vec<f64>>,
    pub ridge: f64,
    pub samples: usize,
    /// Sum of squared residuals on the fitting data, before clamping.
    pub training_sse: f64,
}

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// stored row-major; returns `None` on a non-positive pivot.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}

/// Least squares for each output column with a ridge term on the normal
/// equations. Rows of `x` are regressors without the intercept.
pub fn fit_regression(x: &[Vec<f64>], y: &[Vec<f64>], features: FeatureSet) -> Result<RegressionModel> {
    fit_regression_with_ridge(x, y, features, DEFAULT_RIDGE)
}

pub fn fit_regression_with_ridge(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    features: FeatureSet,
    ridge: f64,
) -> Result<RegressionModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("no regression samples"));
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} feature rows for {} targets", x.len(), y.len())));
    }
    let classes = y[0].len();
    let width = features.width(classes);
    if x.iter().any(|r| r.len() != width) || y.iter().any(|r| r.len() != classes) {
        return Err(Error::Shape(format!(
            "expected {width} features and {classes} targets per sample"
        )));
    }
    if x.iter().chain(y).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data"));
    }
    let n = width + 1;
    let ridge = if x.len() < n && ridge < FALLBACK_RIDGE {
        log::warn!(
            "{} samples for {n} coefficients, using ridge {FALLBACK_RIDGE}",
            x.len()
        );
        FALLBACK_RIDGE
    } else {
        ridge
    };
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![vec![0.0; n]; classes];
    let mut row = vec![0.0; n];
    for (xi, yi) in x.iter().zip(y) {
        row[0] = 1.0;
        row[1..].copy_from_slice(xi);
        for a in 0..n {
            for b in 0..n {
                gram[a * n + b] += row[a] * row[b];
            }
            for (c, r) in rhs.iter_mut().enumerate() {
                r[a] += row[a] * yi[c];
            }
        }
    }
    for i in 0..n {
        gram[i * n + i] += ridge;
    }
    let l = cholesky(&gram, n).ok_or(Error::RankDeficient { ridge })?;
    let weights: Vec<Vec<f64>> = rhs.iter().map(|b| cholesky_solve(&l, n, b)).collect();
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::RankDeficient { ridge });
    }
    let mut model = RegressionModel {
        format_version: 1,
        features,
        classes,
        weights,
        ridge,
        samples: x.len(),
        training_sse: 0.0,
    };
    model.training_sse = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let raw = model.predict_raw_features(xi);
            raw.iter().zip(yi).map(|(p, t)| (p - t) * (p - t)).sum::<f64>()
        })
        .sum();
    Ok(model)
}

/// Clamps at zero and rescales to sum one. `None` when nothing positive
/// survives the clamp.
pub fn clamp_normalize(raw: &[f64]) -> Option<Vec<f64>> {
    let clamped: Vec<f64> = raw.iter().map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 }).collect();
    let total: f64 = clamped.iter().sum();
    (total > 0.0).then(|| clamped.into_iter().map(|v| v / total).collect())
}

impl RegressionModel {
    pub fn predict_raw_features(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn predict_raw(&self, c: &Components) -> Result<Vec<f64>> {
        if c.classes() != self.classes {
            return Err(Error::Shape(format!("{} classes for a {}-class model", c.classes(), self.classes)));
        }
        Ok(self.predict_raw_features(&c.features(&self.features)?))
    }

    /// Raw prediction clamped and renormalized. Falls back to the averaged
    /// network distribution when every output is non-positive.
    pub fn predict_final(&self, c: &Components) -> Result<ReactionDistribution> {
        match clamp_normalize(&self.predict_raw(c)?) {
            Some(w) => ReactionDistribution::new(w),
            None => c.averaged(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: RegressionModel = serde_json::from_str(&text)?;
        if model.format_version != 1 {
            return Err(Error::Checkpoint(format!("unsupported ensemble version {}", model.format_version)));
        }
        let width = model.features.width(model.classes) + 1;
        if model.weights.len() != model.classes || model.weights.iter().any(|w| w.len() != width) {
            return Err(Error::Checkpoint("ensemble weights do not match the feature layout".into()));
        }
        Ok(model)
    }
}
