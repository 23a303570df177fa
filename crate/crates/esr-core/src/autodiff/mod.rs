//! Minimal reverse-mode differentiable compute core.
//!
//! A [`Tape`] records every differentiable operation in execution order,
//! which is already a topological order, so [`Tape::backward`] is a single
//! reverse sweep that visits each node exactly once. Values are 64-bit
//! floats throughout; the models here are small and gradient checking wants
//! the precision.
//!
//! Composite layers (GRU cells, attention pooling) are built from the
//! primitive ops in [`rnn`], so their gradients come from the same verified
//! kernels.

mod adam;
mod gradcheck;
mod ops;
mod rnn;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{fd_gradients, grad_check};
pub use ops::Padding;
pub use rnn::{attention_pool, bidirectional_gru, gru_cell, GruCellVars};

use crate::data::CaLabel;
use crate::error::{Error, Result};
use ops::Op;

// ── Tensor ───────────────────────────────────────────────────────────────────

/// A shaped rank-1..3 array of f64 values. Signals use the (channels,
/// length) convention; convolution weights are (out, in, kernel).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Shape(format!("rank must be 1..=3, got shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if count != data.len() || count == 0 {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let count: usize = shape.iter().product();
        Self::from_vec(shape, vec![0.0; count]).expect("zeros shape")
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::from_vec(&[n], data).expect("non-empty vector")
    }

    pub fn scalar(value: f64) -> Self {
        Self::vector(vec![value])
    }

    /// Marks the tensor as a trainable parameter.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    /// Populated by [`Tape::backward`] on nodes that require gradients.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The single value of a `[1]` tensor.
    pub fn scalar_value(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::Shape(format!("expected a scalar, got shape {:?}", self.shape)))
        }
    }
}

// ── Class probabilities ──────────────────────────────────────────────────────

/// A distribution over the nine arrhythmia classes: entries in (0, 1)
/// summing to 1 within 1e-9.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbabilities(Vec<f64>);

impl ClassProbabilities {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() != CaLabel::COUNT {
            return Err(Error::Invalid(format!(
                "expected {} class probabilities, got {}",
                CaLabel::COUNT,
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Invalid(format!(
                "class probabilities must lie strictly in (0, 1): {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("class probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

// ── Tape ─────────────────────────────────────────────────────────────────────

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

struct Node {
    op: Op,
    inputs: Vec<Var>,
    out: Tensor,
}

/// An append-only record of differentiable operations.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts an input value; it participates in gradients iff the tensor
    /// is marked `with_grad`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, vec![], t)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, mut t: Tensor) -> Var {
        t.requires_grad = false;
        t.grad = None;
        self.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].out
    }

    /// Gradient of the last `backward` root with respect to `v`, if `v`
    /// requires gradients.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].out.grad()
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>, mut out: Tensor) -> Var {
        if !matches!(op, Op::Leaf) {
            out.requires_grad = inputs.iter().any(|v| self.nodes[v.0].out.requires_grad);
        }
        out.grad = None;
        self.nodes.push(Node { op, inputs, out });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].out
    }

    // ── primitive operations ──

    /// 1-D cross-correlation of `x: (Cin, L)` with `w: (Cout, Cin, k)` plus
    /// bias `b: (Cout)`. `SameZero` keeps the length (odd kernels, stride 1);
    /// `Valid` yields `floor((L - k) / stride) + 1`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, padding: Padding, stride: usize) -> Result<Var> {
        let (xv, wv, bv) = (self.val(x), self.val(w), self.val(b));
        ops::check_conv1d(xv, wv, bv, padding, stride)?;
        let out = ops::conv1d_forward(xv, wv, bv, padding, stride);
        Ok(self.push(Op::Conv1d { padding, stride }, vec![x, w, b], out))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::map_forward(self.val(x), |v| v.max(0.0));
        self.push(Op::Relu, vec![x], out)
    }

    /// Leaky rectifier with a learnable scalar slope for negative inputs.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let sv = self.val(slope);
        if sv.len() != 1 {
            return Err(Error::Shape(format!(
                "prelu slope must be a single scalar, got shape {:?}",
                sv.shape()
            )));
        }
        let a = sv.data()[0];
        let out = ops::map_forward(self.val(x), |v| if v > 0.0 { v } else { a * v });
        Ok(self.push(Op::PRelu, vec![x, slope], out))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = ops::map_forward(self.val(x), f64::tanh);
        self.push(Op::Tanh, vec![x], out)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::map_forward(self.val(x), |v| 1.0 / (1.0 + (-v).exp()));
        self.push(Op::Sigmoid, vec![x], out)
    }

    /// Windowed maxima over `x: (C, L)`; gradients route to the first
    /// maximal index of each window.
    pub fn maxpool1d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var> {
        let (out, argmax) = ops::maxpool_forward(self.val(x), size, stride)?;
        Ok(self.push(Op::MaxPool1d { argmax }, vec![x], out))
    }

    /// Fully connected layer `W x + b` with `x: (F)`, `W: (G, F)`, `b: (G)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.val(x), self.val(w), self.val(b));
        ops::check_dense(xv, wv, bv)?;
        let out = ops::dense_forward(xv, wv, Some(bv));
        Ok(self.push(Op::Dense, vec![x, w, b], out))
    }

    /// Matrix-vector product `M x` with `M: (G, F)`, `x: (F)`; both sides
    /// may carry gradients.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (mv, xv) = (self.val(m), self.val(x));
        ops::check_matvec(mv, xv)?;
        let out = ops::dense_forward(xv, mv, None);
        Ok(self.push(Op::MatVec, vec![m, x], out))
    }

    /// Numerically stable softmax over a rank-1 logit vector.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let lv = self.val(logits);
        if lv.rank() != 1 {
            return Err(Error::Shape(format!(
                "softmax expects a rank-1 logit vector, got {:?}",
                lv.shape()
            )));
        }
        let out = ops::softmax_forward(lv);
        Ok(self.push(Op::Softmax, vec![logits], out))
    }

    /// Periodic channel-to-length shuffle: `(C, L) -> (C / r, r L)` with
    /// `out[c][r i + j] = x[c r + j][i]`.
    pub fn subpixel_shuffle(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = ops::shuffle_forward(self.val(x), factor)?;
        Ok(self.push(Op::SubpixelShuffle { factor }, vec![x], out))
    }

    /// Exact inverse of [`Tape::subpixel_shuffle`]: `(C, L) -> (C r, L / r)`.
    pub fn subpixel_unshuffle(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = ops::unshuffle_forward(self.val(x), factor)?;
        Ok(self.push(Op::SubpixelUnshuffle { factor }, vec![x], out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(Op::Add, a, b, |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_op(Op::Mul, a, b, |x, y| x * y)
    }

    fn zip_op(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!(
                "elementwise op on mismatched shapes {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_vec(av.shape(), data)?;
        Ok(self.push(op, vec![a, b], out))
    }

    /// Elementwise `scale * x + shift` with compile-time constants.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = ops::map_forward(self.val(x), |v| scale * v + shift);
        self.push(Op::Affine { scale }, vec![x], out)
    }

    /// Broadcast-multiplies a `[1]` scalar into a tensor.
    pub fn scalar_mul(&mut self, s: Var, x: Var) -> Result<Var> {
        let sv = self.val(s);
        if sv.len() != 1 {
            return Err(Error::Shape(format!(
                "scalar_mul expects a [1] scalar, got {:?}",
                sv.shape()
            )));
        }
        let a = sv.data()[0];
        let out = ops::map_forward(self.val(x), |v| a * v);
        Ok(self.push(Op::ScalarMul, vec![s, x], out))
    }

    /// Inner product of two equal-length rank-1 tensors; output is `[1]`.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.rank() != 1 || bv.rank() != 1 || av.len() != bv.len() {
            return Err(Error::Shape(format!(
                "dot expects equal-length vectors, got {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let v: f64 = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Op::Dot, vec![a, b], Tensor::scalar(v)))
    }

    /// Sum of all elements; output is `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        let v: f64 = self.val(x).data().iter().sum();
        self.push(Op::Sum, vec![x], Tensor::scalar(v))
    }

    /// Column `t` of `x: (F, T)` as an `(F)` vector.
    pub fn slice_col(&mut self, x: Var, col: usize) -> Result<Var> {
        let out = ops::slice_col_forward(self.val(x), col)?;
        Ok(self.push(Op::SliceCol { col }, vec![x], out))
    }

    /// Stacks equal-length `(F)` vectors into an `(F, T)` matrix, one column
    /// per input.
    pub fn stack_cols(&mut self, cols: &[Var]) -> Result<Var> {
        if cols.is_empty() {
            return Err(Error::Shape("stack_cols needs at least one column".into()));
        }
        let f = {
            let first = self.val(cols[0]);
            if first.rank() != 1 {
                return Err(Error::Shape(format!(
                    "stack_cols expects rank-1 columns, got {:?}",
                    first.shape()
                )));
            }
            first.len()
        };
        let t_steps = cols.len();
        let mut data = vec![0.0; f * t_steps];
        for (t, &c) in cols.iter().enumerate() {
            let cv = self.val(c);
            if cv.shape() != [f] {
                return Err(Error::Shape(format!(
                    "stack_cols column {t} has shape {:?}, expected [{f}]",
                    cv.shape()
                )));
            }
            for (row, &v) in cv.data().iter().enumerate() {
                data[row * t_steps + t] = v;
            }
        }
        let out = Tensor::from_vec(&[f, t_steps], data)?;
        Ok(self.push(Op::StackCols, cols.to_vec(), out))
    }

    /// Concatenates `(A, T)` over `(B, T)` into `(A + B, T)`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[1] {
            return Err(Error::Shape(format!(
                "concat_rows expects (A, T) and (B, T), got {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let shape = [av.shape()[0] + bv.shape()[0], av.shape()[1]];
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(av.data());
        data.extend_from_slice(bv.data());
        let out = Tensor::from_vec(&shape, data)?;
        Ok(self.push(Op::ConcatRows, vec![a, b], out))
    }

    /// Reinterprets the data under a new shape of equal element count.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xv = self.val(x);
        let out = Tensor::from_vec(shape, xv.data().to_vec())?;
        if out.len() != xv.len() {
            return Err(Error::Shape(format!(
                "reshape from {:?} to {shape:?} changes element count",
                xv.shape()
            )));
        }
        Ok(self.push(Op::Reshape, vec![x], out))
    }

    /// Per-channel normalization of `x: (C, L)` over the length axis with
    /// learnable gain and bias (the optional normalization layer).
    pub fn channel_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (xv, gv, bv) = (self.val(x), self.val(gain), self.val(bias));
        let (out, stats) = ops::channel_norm_forward(xv, gv, bv)?;
        Ok(self.push(Op::ChannelNorm { stats }, vec![x, gain, bias], out))
    }

    /// Mean square error `(1/M) Σ (ŷ_i - y_i)^2` over all elements.
    pub fn mse_loss(&mut self, y_hat: Var, y: Var) -> Result<Var> {
        let (pv, tv) = (self.val(y_hat), self.val(y));
        if pv.shape() != tv.shape() {
            return Err(Error::Shape(format!(
                "mse_loss length mismatch: {:?} vs {:?}",
                pv.shape(),
                tv.shape()
            )));
        }
        let m = pv.len() as f64;
        let v = pv
            .data()
            .iter()
            .zip(tv.data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            / m;
        Ok(self.push(Op::MseLoss, vec![y_hat, y], Tensor::scalar(v)))
    }

    /// Categorical cross entropy `-Σ z_k ln ẑ_k` between probability
    /// vectors; `z` may be a soft distribution.
    pub fn cce_loss(&mut self, z_hat: Var, z: Var) -> Result<Var> {
        let (pv, tv) = (self.val(z_hat), self.val(z));
        ops::check_cce(pv, tv)?;
        let v = -pv
            .data()
            .iter()
            .zip(tv.data())
            .map(|(&p, &t)| if t == 0.0 { 0.0 } else { t * p.ln() })
            .sum::<f64>();
        Ok(self.push(Op::CceLoss, vec![z_hat, z], Tensor::scalar(v)))
    }

    // ── reverse sweep ──

    /// Reverse-accumulates gradients of the scalar `root` into every node
    /// that requires them. Earlier gradients on this tape are reset first.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.val(root).len() != 1 {
            return Err(Error::Invalid(format!(
                "backward root must be a scalar, got shape {:?}",
                self.val(root).shape()
            )));
        }
        for node in &mut self.nodes {
            node.out.grad = if node.out.requires_grad {
                Some(vec![0.0; node.out.len()])
            } else {
                None
            };
        }
        if !self.nodes[root.0].out.requires_grad {
            return Ok(()); // nothing on the tape wants gradients
        }
        if let Some(g) = self.nodes[root.0].out.grad.as_mut() {
            g[0] = 1.0;
        }

        for i in (0..=root.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(grad_out) = self.nodes[i].out.grad.clone() else {
                continue;
            };
            if grad_out.iter().all(|&g| g == 0.0) {
                continue;
            }
            let (inputs, contribs) = {
                let node = &self.nodes[i];
                let input_vals: Vec<&Tensor> =
                    node.inputs.iter().map(|v| &self.nodes[v.0].out).collect();
                let needs: Vec<bool> = input_vals.iter().map(|t| t.requires_grad).collect();
                let contribs =
                    ops::backward(&node.op, &input_vals, &node.out, &grad_out, &needs);
                (node.inputs.clone(), contribs)
            };
            for (var, contrib) in inputs.iter().zip(contribs) {
                if let Some(c) = contrib {
                    if let Some(g) = self.nodes[var.0].out.grad.as_mut() {
                        for (gi, ci) in g.iter_mut().zip(c) {
                            *gi += ci;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
