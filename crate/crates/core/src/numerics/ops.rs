//! Forward kernels shared by the tape and by direct (tape-free) callers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Valid 1-D convolution over rows, stride 1.
///
/// `input` is `L x D`, `filters` is `F x (h*D)` where each filter row holds an
/// `h x D` window in row-major order, `bias` has `F` entries. Output is
/// `(L - h + 1) x F`.
pub fn conv1d_valid(input: &Tensor, filters: &Tensor, bias: &Tensor, height: usize) -> Result<Tensor> {
    let (l, d) = (input.rows(), input.cols());
    let f = filters.rows();
    if height == 0 || l < height {
        return Err(Error::Shape(format!("conv height {height} needs at least that many rows, got {l}")));
    }
    if filters.shape() != [f, height * d] || bias.len() != f {
        return Err(Error::Shape(format!(
            "filters {:?} / bias {:?} do not fit input {:?} with height {height}",
            filters.shape(),
            bias.shape(),
            input.shape()
        )));
    }
    let windows = l - height + 1;
    let hd = height * d;
    let x = input.data();
    let w = filters.data();
    let mut out = Vec::with_capacity(windows * f);
    for i in 0..windows {
        let window = &x[i * d..i * d + hd];
        for k in 0..f {
            let dot: f64 = window.iter().zip(&w[k * hd..(k + 1) * hd]).map(|(a, b)| a * b).sum();
            out.push(bias.data()[k] + dot);
        }
    }
    Tensor::matrix(windows, f, out)
}

/// Column-wise max over the first `valid` rows. Returns the pooled row and
/// the winning row per column (first one on ties).
pub fn masked_max_pool(seq: &Tensor, valid: usize) -> Result<(Tensor, Vec<usize>)> {
    let (t, f) = (seq.rows(), seq.cols());
    if valid == 0 || valid > t {
        return Err(Error::InvalidArgument(format!("valid length {valid} outside 1..={t}")));
    }
    let mut best = vec![0usize; f];
    for i in 1..valid {
        for (k, b) in best.iter_mut().enumerate() {
            if seq.at(i, k) > seq.at(*b, k) {
                *b = i;
            }
        }
    }
    let pooled = best.iter().enumerate().map(|(k, &i)| seq.at(i, k)).collect();
    Ok((Tensor::row_vector(pooled), best))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// `log softmax` computed with the max shift.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// `-sum target * log softmax(logits)` for a target distribution.
pub fn soft_cross_entropy(logits: &[f64], target: &[f64]) -> Result<f64> {
    if logits.len() != target.len() {
        return Err(Error::Shape(format!("{} logits vs {} targets", logits.len(), target.len())));
    }
    crate::dataset::check_simplex(target, 1e-6)?;
    Ok(-log_softmax(logits).iter().zip(target).map(|(l, t)| t * l).sum::<f64>())
}

/// Weights of one LSTM layer. Gate columns are ordered input, forget,
/// output, candidate, each `hidden` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// `D x 4H`
    pub input: Tensor,
    /// `H x 4H`
    pub recurrent: Tensor,
    /// `4H`
    pub bias: Tensor,
}

impl LstmWeights {
    pub fn hidden(&self) -> usize {
        self.recurrent.rows()
    }
}

/// One LSTM time step: returns `(h_t, c_t)`.
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], w: &LstmWeights) -> Result<(Vec<f64>, Vec<f64>)> {
    let hn = w.hidden();
    let d = w.input.rows();
    if x.len() != d
        || h_prev.len() != hn
        || c_prev.len() != hn
        || w.input.cols() != 4 * hn
        || w.recurrent.cols() != 4 * hn
        || w.bias.len() != 4 * hn
    {
        return Err(Error::Shape(format!(
            "lstm step: x {} h {} c {} with weights {:?}/{:?}/{:?}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            w.input.shape(),
            w.recurrent.shape(),
            w.bias.shape()
        )));
    }
    let mut z = w.bias.data().to_vec();
    for (k, &xv) in x.iter().enumerate() {
        for (zj, wj) in z.iter_mut().zip(w.input.row(k)) {
            *zj += xv * wj;
        }
    }
    for (k, &hv) in h_prev.iter().enumerate() {
        for (zj, wj) in z.iter_mut().zip(w.recurrent.row(k)) {
            *zj += hv * wj;
        }
    }
    let mut h = vec![0.0; hn];
    let mut c = vec![0.0; hn];
    for j in 0..hn {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[hn + j]);
        let o = sigmoid(z[2 * hn + j]);
        let g = z[3 * hn + j].tanh();
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
    Ok((h, c))
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout in training mode, identity otherwise.
pub fn dropout(x: &Tensor, rate: f64, seed: u64, train: bool) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !train || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, &mut ChaCha8Rng::seed_from_u64(seed));
    let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}
