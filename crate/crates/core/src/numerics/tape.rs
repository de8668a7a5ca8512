//! Reverse-mode differentiation over a linear tape of recorded operations.
//!
//! Every value is a 2-D `rows x cols` tensor (vectors are `1 x n`, scalars
//! `1 x 1`). Nodes created with [`Tape::constant`] and everything computed
//! only from constants are skipped by [`Tape::backward`].

use super::ops;
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SliceCols { src: Var, start: usize },
    Row { src: Var, index: usize },
    ConcatCols(Vec<Var>),
    Conv1d { input: Var, filters: Var, bias: Var, height: usize },
    MaxPool { src: Var, argmax: Vec<usize> },
    Dropout { src: Var, mask: Vec<f64> },
    SoftmaxXent { logits: Var, target: Vec<f64>, probs: Vec<f64> },
    SumSquares(Var),
    Scale(Var, f64),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn as_matrix(t: Tensor) -> Tensor {
    if t.shape().len() == 2 {
        t
    } else {
        let n = t.len();
        Tensor::matrix(1, n, t.into_data()).expect("length preserved")
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect()).expect("same shape")
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A differentiable leaf (a parameter).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(as_matrix(value), Op::Leaf, true)
    }

    /// A leaf that gradients do not flow into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(as_matrix(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let (m, k, n) = (x.rows(), x.cols(), y.cols());
        if y.rows() != k {
            return Err(Error::Shape(format!("matmul {:?} x {:?}", x.shape(), y.shape())));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &xv) in x.row(i).iter().enumerate() {
                if xv != 0.0 {
                    for (o, yv) in orow.iter_mut().zip(y.row(p)) {
                        *o += xv * yv;
                    }
                }
            }
        }
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), needs))
    }

    /// Adds a length-`n` bias to every row of an `m x n` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.len() != x.cols() {
            return Err(Error::Shape(format!("bias {:?} for {:?}", b.shape(), x.shape())));
        }
        let n = x.cols();
        let data = x.data().iter().enumerate().map(|(i, v)| v + b.data()[i % n]).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        x.same_shape(y, "add")?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        x.same_shape(y, "mul")?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = map(self.value(a), ops::sigmoid);
        let needs = self.needs(&[a]);
        self.push(value, Op::Sigmoid(a), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = map(self.value(a), f64::tanh);
        let needs = self.needs(&[a]);
        self.push(value, Op::Tanh(a), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = map(self.value(a), |x| x.max(0.0));
        let needs = self.needs(&[a]);
        self.push(value, Op::Relu(a), needs)
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(src);
        if start + len > x.cols() {
            return Err(Error::Shape(format!("columns {start}..{} of {:?}", start + len, x.shape())));
        }
        let data = (0..x.rows()).flat_map(|i| x.row(i)[start..start + len].to_vec()).collect();
        let value = Tensor::matrix(x.rows(), len, data)?;
        let needs = self.needs(&[src]);
        Ok(self.push(value, Op::SliceCols { src, start }, needs))
    }

    pub fn row(&mut self, src: Var, index: usize) -> Result<Var> {
        let x = self.value(src);
        if index >= x.rows() {
            return Err(Error::Shape(format!("row {index} of {:?}", x.shape())));
        }
        let value = Tensor::row_vector(x.row(index).to_vec());
        let needs = self.needs(&[src]);
        Ok(self.push(value, Op::Row { src, index }, needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(1, |p| self.value(*p).rows());
        if parts.iter().any(|p| self.value(*p).rows() != rows) {
            return Err(Error::Shape("concat of tensors with different row counts".into()));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        let value = Tensor::matrix(rows, cols, data)?;
        let needs = self.needs(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), needs))
    }

    pub fn conv1d(&mut self, input: Var, filters: Var, bias: Var, height: usize) -> Result<Var> {
        let value = ops::conv1d_valid(self.value(input), self.value(filters), self.value(bias), height)?;
        let needs = self.needs(&[input, filters, bias]);
        Ok(self.push(
            value,
            Op::Conv1d {
                input,
                filters,
                bias,
                height,
            },
            needs,
        ))
    }

    pub fn max_pool(&mut self, src: Var, valid: usize) -> Result<Var> {
        let (value, argmax) = ops::masked_max_pool(self.value(src), valid)?;
        let needs = self.needs(&[src]);
        Ok(self.push(value, Op::MaxPool { src, argmax }, needs))
    }

    /// Multiplies by a fixed mask (use [`ops::dropout_mask`] to draw one).
    pub fn dropout(&mut self, src: Var, mask: Vec<f64>) -> Result<Var> {
        let x = self.value(src);
        if mask.len() != x.len() {
            return Err(Error::Shape(format!("mask of {} for {:?}", mask.len(), x.shape())));
        }
        let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(&[src]);
        Ok(self.push(value, Op::Dropout { src, mask }, needs))
    }

    /// Soft-label cross-entropy of `softmax(logits)` against `target`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let z = self.value(logits).data().to_vec();
        let loss = ops::soft_cross_entropy(&z, target)?;
        let probs = ops::softmax(&z);
        let needs = self.needs(&[logits]);
        Ok(self.push(
            Tensor::matrix(1, 1, vec![loss])?,
            Op::SoftmaxXent {
                logits,
                target: target.to_vec(),
                probs,
            },
            needs,
        ))
    }

    pub fn sum_squares(&mut self, src: Var) -> Var {
        let s = self.value(src).sum_squares();
        let needs = self.needs(&[src]);
        self.push(Tensor::matrix(1, 1, vec![s]).expect("scalar"), Op::SumSquares(src), needs)
    }

    pub fn scale(&mut self, src: Var, k: f64) -> Var {
        let value = map(self.value(src), |x| x * k);
        let needs = self.needs(&[src]);
        self.push(value, Op::Scale(src, k), needs)
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!("backward from non-scalar {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("backward pass"));
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let shaped = |like: &Tensor, data: Vec<f64>| Tensor::new(like.shape().to_vec(), data).expect("shape");
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let (m, k, n) = (x.rows(), x.cols(), y.cols());
                if self.nodes[a.0].needs_grad {
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] = g.row(i).iter().zip(y.row(p)).map(|(gv, yv)| gv * yv).sum();
                        }
                    }
                    self.accumulate(grads, *a, shaped(x, ga));
                }
                if self.nodes[b.0].needs_grad {
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for (p, &xv) in x.row(i).iter().enumerate() {
                            if xv != 0.0 {
                                for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(g.row(i)) {
                                    *o += xv * gv;
                                }
                            }
                        }
                    }
                    self.accumulate(grads, *b, shaped(y, gb));
                }
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                let n = g.cols();
                let mut gb = vec![0.0; n];
                for i in 0..g.rows() {
                    for (o, gv) in gb.iter_mut().zip(g.row(i)) {
                        *o += gv;
                    }
                }
                self.accumulate(grads, *bias, shaped(self.value(*bias), gb));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let ga = g.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
                let gb = g.data().iter().zip(x.data()).map(|(p, q)| p * q).collect();
                self.accumulate(grads, *a, shaped(x, ga));
                self.accumulate(grads, *b, shaped(y, gb));
            }
            Op::Sigmoid(a) => {
                let d = g.data().iter().zip(node.value.data()).map(|(gv, s)| gv * s * (1.0 - s)).collect();
                self.accumulate(grads, *a, shaped(g, d));
            }
            Op::Tanh(a) => {
                let d = g.data().iter().zip(node.value.data()).map(|(gv, t)| gv * (1.0 - t * t)).collect();
                self.accumulate(grads, *a, shaped(g, d));
            }
            Op::Relu(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(self.value(*a).data())
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, shaped(g, d));
            }
            Op::SliceCols { src, start } => {
                let x = self.value(*src);
                let mut d = vec![0.0; x.len()];
                let (cols, len) = (x.cols(), g.cols());
                for i in 0..g.rows() {
                    d[i * cols + start..i * cols + start + len].copy_from_slice(g.row(i));
                }
                self.accumulate(grads, *src, shaped(x, d));
            }
            Op::Row { src, index } => {
                let x = self.value(*src);
                let mut d = vec![0.0; x.len()];
                let cols = x.cols();
                d[index * cols..(index + 1) * cols].copy_from_slice(g.data());
                self.accumulate(grads, *src, shaped(x, d));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let x = self.value(*p);
                    let w = x.cols();
                    let d = (0..g.rows()).flat_map(|i| g.row(i)[offset..offset + w].to_vec()).collect();
                    self.accumulate(grads, *p, shaped(x, d));
                    offset += w;
                }
            }
            Op::Conv1d {
                input,
                filters,
                bias,
                height,
            } => {
                let (x, w) = (self.value(*input), self.value(*filters));
                let d = x.cols();
                let hd = height * d;
                let f = w.rows();
                let mut gx = vec![0.0; x.len()];
                let mut gw = vec![0.0; w.len()];
                let mut gb = vec![0.0; f];
                for i in 0..g.rows() {
                    let window = &x.data()[i * d..i * d + hd];
                    for k in 0..f {
                        let gv = g.at(i, k);
                        if gv == 0.0 {
                            continue;
                        }
                        gb[k] += gv;
                        let wk = &w.data()[k * hd..(k + 1) * hd];
                        for (o, xv) in gw[k * hd..(k + 1) * hd].iter_mut().zip(window) {
                            *o += gv * xv;
                        }
                        for (o, wv) in gx[i * d..i * d + hd].iter_mut().zip(wk) {
                            *o += gv * wv;
                        }
                    }
                }
                if self.nodes[input.0].needs_grad {
                    self.accumulate(grads, *input, shaped(x, gx));
                }
                self.accumulate(grads, *filters, shaped(w, gw));
                self.accumulate(grads, *bias, shaped(self.value(*bias), gb));
            }
            Op::MaxPool { src, argmax } => {
                let x = self.value(*src);
                let cols = x.cols();
                let mut d = vec![0.0; x.len()];
                for (k, &i) in argmax.iter().enumerate() {
                    d[i * cols + k] += g.data()[k];
                }
                self.accumulate(grads, *src, shaped(x, d));
            }
            Op::Dropout { src, mask } => {
                let d = g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                self.accumulate(grads, *src, shaped(g, d));
            }
            Op::SoftmaxXent { logits, target, probs } => {
                let gv = g.data()[0];
                let tsum: f64 = target.iter().sum();
                let d = probs.iter().zip(target).map(|(p, t)| gv * (p * tsum - t)).collect();
                self.accumulate(grads, *logits, shaped(self.value(*logits), d));
            }
            Op::SumSquares(a) => {
                let gv = g.data()[0];
                let x = self.value(*a);
                let d = x.data().iter().map(|v| 2.0 * gv * v).collect();
                self.accumulate(grads, *a, shaped(x, d));
            }
            Op::Scale(a, k) => {
                let d = g.data().iter().map(|v| v * k).collect();
                self.accumulate(grads, *a, shaped(g, d));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, shaped like its value. `None` when nothing
    /// flowed into it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v` reshaped to `shape`, zeros when nothing flowed in.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        match self.get(v) {
            Some(g) => Tensor::new(shape.to_vec(), g.data().to_vec()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }
}
