use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::DEFAULT_DIM;
use crate::dataset::ReactionDistribution;
use crate::error::{Error, Result};
use crate::numerics::ops::{dropout_mask, softmax};
use crate::numerics::{Params, Tape, Tensor, Var};

pub const DEFAULT_MAX_LEN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
        }
    }
}

/// How the configured filter count is spread over the heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterCount {
    PerHeight,
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub embedding_dim: usize,
    pub heights: Vec<usize>,
    pub filters: usize,
    pub filter_count: FilterCount,
    pub dropout: f64,
    pub include_like: bool,
    pub max_len: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embedding_dim: DEFAULT_DIM,
            heights: vec![3, 4, 5],
            filters: 40,
            filter_count: FilterCount::PerHeight,
            dropout: 0.5,
            include_like: false,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl CnnConfig {
    /// Filters used for the `i`-th height.
    pub fn filters_at(&self, i: usize) -> usize {
        match self.filter_count {
            FilterCount::PerHeight => self.filters,
            FilterCount::Total => {
                let n = self.heights.len();
                self.filters / n + usize::from(i < self.filters % n)
            }
        }
    }

    pub fn total_filters(&self) -> usize {
        (0..self.heights.len()).map(|i| self.filters_at(i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub include_like: bool,
    pub max_len: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            embedding_dim: DEFAULT_DIM,
            hidden: 50,
            dropout: 0.5,
            include_like: false,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Cnn(CnnConfig),
    Lstm(LstmConfig),
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-a..a)).collect()).expect("shape")
}

/// Weights get L2 regularization, biases do not.
pub fn is_weight(name: &str) -> bool {
    !name.ends_with(".b")
}

impl Architecture {
    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Cnn(_) => ModelKind::Cnn,
            Architecture::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn include_like(&self) -> bool {
        match self {
            Architecture::Cnn(c) => c.include_like,
            Architecture::Lstm(c) => c.include_like,
        }
    }

    pub fn classes(&self) -> usize {
        if self.include_like() {
            6
        } else {
            5
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self {
            Architecture::Cnn(c) => c.embedding_dim,
            Architecture::Lstm(c) => c.embedding_dim,
        }
    }

    pub fn max_len(&self) -> usize {
        match self {
            Architecture::Cnn(c) => c.max_len,
            Architecture::Lstm(c) => c.max_len,
        }
    }

    pub fn set_max_len(&mut self, max_len: usize) {
        match self {
            Architecture::Cnn(c) => c.max_len = max_len,
            Architecture::Lstm(c) => c.max_len = max_len,
        }
    }

    fn dropout_rate(&self) -> f64 {
        match self {
            Architecture::Cnn(c) => c.dropout,
            Architecture::Lstm(c) => c.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.embedding_dim() == 0 || self.max_len() == 0 {
            return bad("embedding dimension and max_len must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate()) {
            return bad("dropout rate must lie in [0, 1)");
        }
        match self {
            Architecture::Cnn(c) => {
                if c.heights.is_empty() || c.heights.contains(&0) {
                    return bad("filter heights must be at least 1");
                }
                if (0..c.heights.len()).any(|i| c.filters_at(i) == 0) {
                    return bad("every filter height needs at least one filter");
                }
            }
            Architecture::Lstm(c) => {
                if c.hidden == 0 {
                    return bad("hidden size must be at least 1");
                }
            }
        }
        Ok(())
    }

    pub fn init_params(&self, seed: u64) -> Result<Params> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.embedding_dim();
        let k = self.classes();
        let mut p = Params::new();
        match self {
            Architecture::Cnn(c) => {
                for (i, &h) in c.heights.iter().enumerate() {
                    let f = c.filters_at(i);
                    p.insert(format!("conv{h}.w"), uniform(&mut rng, &[f, h * d], h * d, f))?;
                    p.insert(format!("conv{h}.b"), Tensor::zeros(&[f]))?;
                }
                let f = c.total_filters();
                p.insert("out.w", uniform(&mut rng, &[f, k], f, k))?;
            }
            Architecture::Lstm(c) => {
                let h = c.hidden;
                p.insert("lstm.wx", uniform(&mut rng, &[d, 4 * h], d, 4 * h))?;
                p.insert("lstm.wh", uniform(&mut rng, &[h, 4 * h], h, 4 * h))?;
                let mut b = Tensor::zeros(&[4 * h]);
                // forget gate starts open
                b.data_mut()[h..2 * h].fill(1.0);
                p.insert("lstm.b", b)?;
                p.insert("out.w", uniform(&mut rng, &[h, k], h, k))?;
            }
        }
        p.insert("out.b", Tensor::zeros(&[k]))?;
        Ok(p)
    }

    /// Checks that `params` holds every tensor this architecture needs with
    /// the right shape.
    pub fn check_params(&self, params: &Params) -> Result<()> {
        let expected = self.init_params(0)?;
        if expected.len() != params.len() {
            return Err(Error::Shape(format!("{} parameters, expected {}", params.len(), expected.len())));
        }
        for (name, t) in expected.iter() {
            let got = params.require(name)?;
            if got.shape() != t.shape() {
                return Err(Error::Shape(format!("{name}: {:?}, expected {:?}", got.shape(), t.shape())));
            }
        }
        Ok(())
    }

    /// Records the forward pass on `tape` and returns the logits.
    ///
    /// `vars` are the tape nodes of `params` in insertion order. `embedded`
    /// needs at least `valid` rows; rows past `valid` are never read.
    /// Dropout is applied when `rng` is given.
    pub fn logits(
        &self,
        tape: &mut Tape,
        params: &Params,
        vars: &[Var],
        embedded: &Tensor,
        valid: usize,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let d = self.embedding_dim();
        if embedded.cols() != d {
            return Err(Error::Shape(format!("input width {} for embedding dimension {d}", embedded.cols())));
        }
        if valid == 0 || valid > embedded.rows() {
            return Err(Error::InvalidArgument(format!(
                "valid length {valid} outside 1..={}",
                embedded.rows()
            )));
        }
        let var = |name: &str| -> Result<Var> {
            params
                .index_of(name)
                .map(|i| vars[i])
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let features = match self {
            Architecture::Cnn(c) => {
                let max_h = c.heights.iter().copied().max().unwrap_or(1);
                let rows = valid.max(max_h);
                let mut data = embedded.data()[..valid * d].to_vec();
                data.resize(rows * d, 0.0);
                let x = tape.constant(Tensor::matrix(rows, d, data)?);
                let mut pooled = Vec::with_capacity(c.heights.len());
                for &h in &c.heights {
                    let conv = tape.conv1d(x, var(&format!("conv{h}.w"))?, var(&format!("conv{h}.b"))?, h)?;
                    let act = tape.relu(conv);
                    let windows = (valid + 1).saturating_sub(h).max(1);
                    pooled.push(tape.max_pool(act, windows)?);
                }
                tape.concat_cols(&pooled)?
            }
            Architecture::Lstm(c) => {
                let hn = c.hidden;
                let x = tape.constant(Tensor::matrix(valid, d, embedded.data()[..valid * d].to_vec())?);
                let xw = tape.matmul(x, var("lstm.wx")?)?;
                let xw = tape.add_bias(xw, var("lstm.b")?)?;
                let wh = var("lstm.wh")?;
                let mut h = tape.constant(Tensor::row_vector(vec![0.0; hn]));
                let mut cell = tape.constant(Tensor::row_vector(vec![0.0; hn]));
                for t in 0..valid {
                    let xt = tape.row(xw, t)?;
                    let hw = tape.matmul(h, wh)?;
                    let z = tape.add(xt, hw)?;
                    let zi = tape.slice_cols(z, 0, hn)?;
                    let zf = tape.slice_cols(z, hn, hn)?;
                    let zo = tape.slice_cols(z, 2 * hn, hn)?;
                    let zg = tape.slice_cols(z, 3 * hn, hn)?;
                    let (i, f, o, g) = (tape.sigmoid(zi), tape.sigmoid(zf), tape.sigmoid(zo), tape.tanh(zg));
                    let keep = tape.mul(f, cell)?;
                    let write = tape.mul(i, g)?;
                    cell = tape.add(keep, write)?;
                    let squashed = tape.tanh(cell);
                    h = tape.mul(o, squashed)?;
                }
                h
            }
        };
        let features = match rng {
            Some(rng) if self.dropout_rate() > 0.0 => {
                let n = tape.value(features).len();
                tape.dropout(features, dropout_mask(n, self.dropout_rate(), rng))?
            }
            _ => features,
        };
        let out = tape.matmul(features, var("out.w")?)?;
        tape.add_bias(out, var("out.b")?)
    }

    /// Evaluation-mode forward pass.
    pub fn forward(&self, params: &Params, embedded: &Tensor, valid: usize) -> Result<ReactionDistribution> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.tensors().map(|t| tape.constant(t.clone())).collect();
        let logits = self.logits(&mut tape, params, &vars, embedded, valid, None)?;
        let probs = softmax(tape.value(logits).data());
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        ReactionDistribution::new(probs)
    }

    /// Soft cross-entropy of one example and its gradient, one tensor per
    /// parameter. No regularization term.
    pub fn loss_and_grad(
        &self,
        params: &Params,
        embedded: &Tensor,
        valid: usize,
        target: &[f64],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<Tensor>)> {
        if target.len() != self.classes() {
            return Err(Error::Shape(format!("target of {} for {} classes", target.len(), self.classes())));
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.tensors().map(|t| tape.param(t.clone())).collect();
        let logits = self.logits(&mut tape, params, &vars, embedded, valid, rng)?;
        let loss = tape.softmax_cross_entropy(logits, target)?;
        let grads = tape.backward(loss)?;
        let out = vars
            .iter()
            .zip(params.tensors())
            .map(|(v, t)| grads.get_or_zeros(*v, t.shape()))
            .collect();
        Ok((tape.scalar(loss), out))
    }
}
