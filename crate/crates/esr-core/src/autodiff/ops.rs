//! Forward and backward kernels for the tape primitives.
//!
//! Every kernel pair lives here side by side; `backward` returns one adjoint
//! buffer per input (skipping inputs that do not require gradients), and the
//! tape accumulates them.

use crate::error::{Error, Result};

use super::Tensor;

/// Convolution padding behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad so the output length equals the input length; requires an
    /// odd kernel and stride 1.
    SameZero,
    /// No padding: output length `floor((L - k) / stride) + 1`.
    Valid,
}

/// Saved per-channel statistics for the normalization backward pass.
#[derive(Clone, Debug)]
pub(crate) struct NormStats {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub(crate) enum Op {
    Leaf,
    Conv1d { padding: Padding, stride: usize },
    Relu,
    PRelu,
    Tanh,
    Sigmoid,
    MaxPool1d { argmax: Vec<usize> },
    Dense,
    MatVec,
    Softmax,
    SubpixelShuffle { factor: usize },
    SubpixelUnshuffle { factor: usize },
    Add,
    Mul,
    Affine { scale: f64 },
    ScalarMul,
    Dot,
    Sum,
    SliceCol { col: usize },
    StackCols,
    ConcatRows,
    Reshape,
    ChannelNorm { stats: NormStats },
    MseLoss,
    CceLoss,
}

pub(crate) fn map_forward(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

// ── conv1d ───────────────────────────────────────────────────────────────────

pub(crate) fn check_conv1d(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    padding: Padding,
    stride: usize,
) -> Result<()> {
    if x.rank() != 2 || w.rank() != 3 || b.rank() != 1 {
        return Err(Error::Shape(format!(
            "conv1d expects x (Cin, L), w (Cout, Cin, k), b (Cout); got {:?}, {:?}, {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let (c_in, l) = (x.shape()[0], x.shape()[1]);
    let (c_out, w_cin, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if w_cin != c_in {
        return Err(Error::Shape(format!(
            "conv1d channel mismatch: input has {c_in}, kernel expects {w_cin}"
        )));
    }
    if b.shape()[0] != c_out {
        return Err(Error::Shape(format!(
            "conv1d bias length {} does not match {c_out} output channels",
            b.shape()[0]
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv1d stride must be at least 1".into()));
    }
    match padding {
        Padding::SameZero => {
            if stride != 1 {
                return Err(Error::Shape("same_zero padding requires stride 1".into()));
            }
            if k % 2 == 0 {
                return Err(Error::Shape(format!(
                    "same_zero padding requires an odd kernel, got k = {k}"
                )));
            }
        }
        Padding::Valid => {
            if l < k {
                return Err(Error::Shape(format!(
                    "conv1d valid padding needs L >= k, got L = {l}, k = {k}"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn conv1d_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    padding: Padding,
    stride: usize,
) -> Tensor {
    let (c_in, l) = (x.shape()[0], x.shape()[1]);
    let (c_out, k) = (w.shape()[0], w.shape()[2]);
    let (l_out, offset) = match padding {
        Padding::SameZero => (l, (k / 2) as isize),
        Padding::Valid => ((l - k) / stride + 1, 0),
    };
    let mut out = vec![0.0; c_out * l_out];
    for co in 0..c_out {
        for i in 0..l_out {
            let mut acc = b.data()[co];
            for ci in 0..c_in {
                let xrow = &x.data()[ci * l..(ci + 1) * l];
                let wrow = &w.data()[(co * c_in + ci) * k..(co * c_in + ci + 1) * k];
                for (j, &wj) in wrow.iter().enumerate() {
                    let p = (i * stride + j) as isize - offset;
                    if p >= 0 && (p as usize) < l {
                        acc += wj * xrow[p as usize];
                    }
                }
            }
            out[co * l_out + i] = acc;
        }
    }
    Tensor::from_vec(&[c_out, l_out], out).expect("conv shape")
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    padding: Padding,
    stride: usize,
    grad_out: &[f64],
    l_out: usize,
    needs_x: bool,
    needs_w: bool,
    needs_b: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let (c_in, l) = (x.shape()[0], x.shape()[1]);
    let (c_out, k) = (w.shape()[0], w.shape()[2]);
    let offset = match padding {
        Padding::SameZero => (k / 2) as isize,
        Padding::Valid => 0,
    };
    let mut dx = needs_x.then(|| vec![0.0; x.len()]);
    let mut dw = needs_w.then(|| vec![0.0; w.len()]);
    let mut db = needs_b.then(|| vec![0.0; c_out]);
    for co in 0..c_out {
        for i in 0..l_out {
            let g = grad_out[co * l_out + i];
            if g == 0.0 {
                continue;
            }
            if let Some(db) = db.as_mut() {
                db[co] += g;
            }
            for ci in 0..c_in {
                for j in 0..k {
                    let p = (i * stride + j) as isize - offset;
                    if p < 0 || p as usize >= l {
                        continue;
                    }
                    let p = p as usize;
                    if let Some(dx) = dx.as_mut() {
                        dx[ci * l + p] += g * w.data()[(co * c_in + ci) * k + j];
                    }
                    if let Some(dw) = dw.as_mut() {
                        dw[(co * c_in + ci) * k + j] += g * x.data()[ci * l + p];
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

// ── pooling ──────────────────────────────────────────────────────────────────

pub(crate) fn maxpool_forward(x: &Tensor, size: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 2 {
        return Err(Error::Shape(format!("maxpool1d expects (C, L), got {:?}", x.shape())));
    }
    if size == 0 || stride == 0 {
        return Err(Error::Shape("maxpool1d size and stride must be at least 1".into()));
    }
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if l < size {
        return Err(Error::Shape(format!(
            "maxpool1d window {size} exceeds input length {l}"
        )));
    }
    let l_out = (l - size) / stride + 1;
    let mut out = vec![0.0; c * l_out];
    let mut argmax = vec![0usize; c * l_out];
    for ci in 0..c {
        for i in 0..l_out {
            let start = i * stride;
            let mut best = start;
            for off in 1..size {
                // First maximal index wins ties.
                if x.data()[ci * l + start + off] > x.data()[ci * l + best] {
                    best = start + off;
                }
            }
            out[ci * l_out + i] = x.data()[ci * l + best];
            argmax[ci * l_out + i] = ci * l + best;
        }
    }
    Ok((Tensor::from_vec(&[c, l_out], out)?, argmax))
}

// ── dense / matvec ───────────────────────────────────────────────────────────

pub(crate) fn check_dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<()> {
    check_matvec(w, x)?;
    if b.rank() != 1 || b.shape()[0] != w.shape()[0] {
        return Err(Error::Shape(format!(
            "dense bias shape {:?} does not match {} outputs",
            b.shape(),
            w.shape()[0]
        )));
    }
    Ok(())
}

pub(crate) fn check_matvec(m: &Tensor, x: &Tensor) -> Result<()> {
    if m.rank() != 2 || x.rank() != 1 || m.shape()[1] != x.shape()[0] {
        return Err(Error::Shape(format!(
            "matrix-vector product on {:?} and {:?}",
            m.shape(),
            x.shape()
        )));
    }
    Ok(())
}

pub(crate) fn dense_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Tensor {
    let (g, f) = (w.shape()[0], w.shape()[1]);
    let mut out = vec![0.0; g];
    for gi in 0..g {
        let row = &w.data()[gi * f..(gi + 1) * f];
        let mut acc = b.map_or(0.0, |b| b.data()[gi]);
        for (wf, xf) in row.iter().zip(x.data()) {
            acc += wf * xf;
        }
        out[gi] = acc;
    }
    Tensor::vector(out)
}

fn matvec_backward(
    m: &Tensor,
    x: &Tensor,
    grad_out: &[f64],
    needs_m: bool,
    needs_x: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let (g, f) = (m.shape()[0], m.shape()[1]);
    let dm = needs_m.then(|| {
        let mut dm = vec![0.0; m.len()];
        for gi in 0..g {
            for fi in 0..f {
                dm[gi * f + fi] = grad_out[gi] * x.data()[fi];
            }
        }
        dm
    });
    let dx = needs_x.then(|| {
        let mut dx = vec![0.0; f];
        for gi in 0..g {
            for fi in 0..f {
                dx[fi] += grad_out[gi] * m.data()[gi * f + fi];
            }
        }
        dx
    });
    (dm, dx)
}

// ── softmax ──────────────────────────────────────────────────────────────────

pub(crate) fn softmax_forward(logits: &Tensor) -> Tensor {
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::vector(exps.into_iter().map(|e| e / sum).collect())
}

// ── subpixel shuffle ─────────────────────────────────────────────────────────

pub(crate) fn shuffle_forward(x: &Tensor, factor: usize) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::Shape(format!("subpixel_shuffle expects (C, L), got {:?}", x.shape())));
    }
    if factor == 0 {
        return Err(Error::Shape("shuffle factor must be at least 1".into()));
    }
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if c % factor != 0 {
        return Err(Error::Shape(format!(
            "subpixel_shuffle needs channels divisible by the factor: {c} % {factor} != 0"
        )));
    }
    let (c_out, l_out) = (c / factor, l * factor);
    let mut out = vec![0.0; c_out * l_out];
    for co in 0..c_out {
        for i in 0..l {
            for j in 0..factor {
                out[co * l_out + factor * i + j] = x.data()[(co * factor + j) * l + i];
            }
        }
    }
    Tensor::from_vec(&[c_out, l_out], out)
}

pub(crate) fn unshuffle_forward(x: &Tensor, factor: usize) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::Shape(format!(
            "subpixel_unshuffle expects (C, L), got {:?}",
            x.shape()
        )));
    }
    if factor == 0 {
        return Err(Error::Shape("shuffle factor must be at least 1".into()));
    }
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if l % factor != 0 {
        return Err(Error::Shape(format!(
            "subpixel_unshuffle needs length divisible by the factor: {l} % {factor} != 0"
        )));
    }
    let (c_out, l_out) = (c * factor, l / factor);
    let mut out = vec![0.0; c_out * l_out];
    for ci in 0..c {
        for i in 0..l_out {
            for j in 0..factor {
                out[(ci * factor + j) * l_out + i] = x.data()[ci * l + factor * i + j];
            }
        }
    }
    Tensor::from_vec(&[c_out, l_out], out)
}

// ── sequence plumbing ────────────────────────────────────────────────────────

pub(crate) fn slice_col_forward(x: &Tensor, col: usize) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::Shape(format!("slice_col expects (F, T), got {:?}", x.shape())));
    }
    let (f, t_steps) = (x.shape()[0], x.shape()[1]);
    if col >= t_steps {
        return Err(Error::Shape(format!("column {col} out of range 0..{t_steps}")));
    }
    let data = (0..f).map(|row| x.data()[row * t_steps + col]).collect();
    Ok(Tensor::vector(data))
}

// ── normalization ────────────────────────────────────────────────────────────

const NORM_EPS: f64 = 1e-5;

pub(crate) fn channel_norm_forward(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, NormStats)> {
    if x.rank() != 2 {
        return Err(Error::Shape(format!("channel_norm expects (C, L), got {:?}", x.shape())));
    }
    let (c, l) = (x.shape()[0], x.shape()[1]);
    if gain.shape() != [c] || bias.shape() != [c] {
        return Err(Error::Shape(format!(
            "channel_norm gain/bias must be ({c}), got {:?} and {:?}",
            gain.shape(),
            bias.shape()
        )));
    }
    let mut out = vec![0.0; c * l];
    let mut mean = vec![0.0; c];
    let mut inv_std = vec![0.0; c];
    for ci in 0..c {
        let row = &x.data()[ci * l..(ci + 1) * l];
        let mu = row.iter().sum::<f64>() / l as f64;
        let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / l as f64;
        let is = 1.0 / (var + NORM_EPS).sqrt();
        for (i, &v) in row.iter().enumerate() {
            out[ci * l + i] = gain.data()[ci] * (v - mu) * is + bias.data()[ci];
        }
        mean[ci] = mu;
        inv_std[ci] = is;
    }
    Ok((
        Tensor::from_vec(&[c, l], out)?,
        NormStats { mean, inv_std },
    ))
}

#[allow(clippy::type_complexity)]
fn channel_norm_backward(
    x: &Tensor,
    gain: &Tensor,
    stats: &NormStats,
    grad_out: &[f64],
    needs: &[bool],
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let mut dx = needs[0].then(|| vec![0.0; x.len()]);
    let mut dgain = needs[1].then(|| vec![0.0; c]);
    let mut dbias = needs[2].then(|| vec![0.0; c]);
    let ln = l as f64;
    for ci in 0..c {
        let row = &x.data()[ci * l..(ci + 1) * l];
        let g_row = &grad_out[ci * l..(ci + 1) * l];
        let (mu, is) = (stats.mean[ci], stats.inv_std[ci]);
        let xhat: Vec<f64> = row.iter().map(|&v| (v - mu) * is).collect();
        if let Some(dgain) = dgain.as_mut() {
            dgain[ci] = g_row.iter().zip(&xhat).map(|(&g, &h)| g * h).sum();
        }
        if let Some(dbias) = dbias.as_mut() {
            dbias[ci] = g_row.iter().sum();
        }
        if let Some(dx) = dx.as_mut() {
            let a = gain.data()[ci];
            let dxhat: Vec<f64> = g_row.iter().map(|&g| g * a).collect();
            let sum_dxhat: f64 = dxhat.iter().sum();
            let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(&d, &h)| d * h).sum();
            for i in 0..l {
                dx[ci * l + i] =
                    is / ln * (ln * dxhat[i] - sum_dxhat - xhat[i] * sum_dxhat_xhat);
            }
        }
    }
    (dx, dgain, dbias)
}

// ── losses ───────────────────────────────────────────────────────────────────

pub(crate) fn check_cce(z_hat: &Tensor, z: &Tensor) -> Result<()> {
    if z_hat.rank() != 1 || z.rank() != 1 || z_hat.len() != z.len() {
        return Err(Error::Shape(format!(
            "cce_loss expects equal-length probability vectors, got {:?} vs {:?}",
            z_hat.shape(),
            z.shape()
        )));
    }
    if z_hat.data().iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Invalid("cce_loss predictions must be strictly positive".into()));
    }
    if z.data().iter().any(|&p| p < 0.0) {
        return Err(Error::Invalid("cce_loss targets must be non-negative".into()));
    }
    // Tolerance admits finite-difference perturbations of single entries.
    for (name, t) in [("predictions", z_hat), ("targets", z)] {
        let sum: f64 = t.data().iter().sum();
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::Invalid(format!("cce_loss {name} sum to {sum}, not 1")));
        }
    }
    Ok(())
}

// ── backward dispatch ────────────────────────────────────────────────────────

/// Computes the adjoint of each input given the output adjoint `grad_out`.
/// Entries are `None` for inputs with `needs[i] == false`.
pub(crate) fn backward(
    op: &Op,
    inputs: &[&Tensor],
    out: &Tensor,
    grad_out: &[f64],
    needs: &[bool],
) -> Vec<Option<Vec<f64>>> {
    match op {
        Op::Leaf => vec![],
        Op::Conv1d { padding, stride } => {
            let (dx, dw, db) = conv1d_backward(
                inputs[0],
                inputs[1],
                *padding,
                *stride,
                grad_out,
                out.shape()[1],
                needs[0],
                needs[1],
                needs[2],
            );
            vec![dx, dw, db]
        }
        Op::Relu => {
            let dx = needs[0].then(|| {
                inputs[0]
                    .data()
                    .iter()
                    .zip(grad_out)
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect()
            });
            vec![dx]
        }
        Op::PRelu => {
            let a = inputs[1].data()[0];
            let dx = needs[0].then(|| {
                inputs[0]
                    .data()
                    .iter()
                    .zip(grad_out)
                    .map(|(&x, &g)| if x > 0.0 { g } else { a * g })
                    .collect()
            });
            let da = needs[1].then(|| {
                let s = inputs[0]
                    .data()
                    .iter()
                    .zip(grad_out)
                    .map(|(&x, &g)| if x > 0.0 { 0.0 } else { g * x })
                    .sum();
                vec![s]
            });
            vec![dx, da]
        }
        Op::Tanh => {
            let dx = needs[0].then(|| {
                out.data()
                    .iter()
                    .zip(grad_out)
                    .map(|(&y, &g)| g * (1.0 - y * y))
                    .collect()
            });
            vec![dx]
        }
        Op::Sigmoid => {
            let dx = needs[0].then(|| {
                out.data()
                    .iter()
                    .zip(grad_out)
                    .map(|(&y, &g)| g * y * (1.0 - y))
                    .collect()
            });
            vec![dx]
        }
        Op::MaxPool1d { argmax, .. } => {
            let dx = needs[0].then(|| {
                let mut dx = vec![0.0; inputs[0].len()];
                for (&src, &g) in argmax.iter().zip(grad_out) {
                    dx[src] += g;
                }
                dx
            });
            vec![dx]
        }
        Op::Dense => {
            let (dw, dx) = matvec_backward(inputs[1], inputs[0], grad_out, needs[1], needs[0]);
            let db = needs[2].then(|| grad_out.to_vec());
            vec![dx, dw, db]
        }
        Op::MatVec => {
            let (dm, dx) = matvec_backward(inputs[0], inputs[1], grad_out, needs[0], needs[1]);
            vec![dm, dx]
        }
        Op::Softmax => {
            let dx = needs[0].then(|| {
                let y = out.data();
                let weighted: f64 = grad_out.iter().zip(y).map(|(&g, &p)| g * p).sum();
                y.iter()
                    .zip(grad_out)
                    .map(|(&p, &g)| p * (g - weighted))
                    .collect()
            });
            vec![dx]
        }
        Op::SubpixelShuffle { factor } => {
            let dx = needs[0].then(|| {
                let (c, l) = (inputs[0].shape()[0], inputs[0].shape()[1]);
                let (c_out, l_out) = (c / factor, l * factor);
                let mut dx = vec![0.0; inputs[0].len()];
                for co in 0..c_out {
                    for i in 0..l {
                        for j in 0..*factor {
                            dx[(co * factor + j) * l + i] = grad_out[co * l_out + factor * i + j];
                        }
                    }
                }
                dx
            });
            vec![dx]
        }
        Op::SubpixelUnshuffle { factor } => {
            let dx = needs[0].then(|| {
                let (c, l) = (inputs[0].shape()[0], inputs[0].shape()[1]);
                let l_out = l / factor;
                let mut dx = vec![0.0; inputs[0].len()];
                for ci in 0..c {
                    for i in 0..l_out {
                        for j in 0..*factor {
                            dx[ci * l + factor * i + j] = grad_out[(ci * factor + j) * l_out + i];
                        }
                    }
                }
                dx
            });
            vec![dx]
        }
        Op::Add => {
            let da = needs[0].then(|| grad_out.to_vec());
            let db = needs[1].then(|| grad_out.to_vec());
            vec![da, db]
        }
        Op::Mul => {
            let da = needs[0].then(|| {
                inputs[1].data().iter().zip(grad_out).map(|(&b, &g)| b * g).collect()
            });
            let db = needs[1].then(|| {
                inputs[0].data().iter().zip(grad_out).map(|(&a, &g)| a * g).collect()
            });
            vec![da, db]
        }
        Op::Affine { scale } => {
            let dx = needs[0].then(|| grad_out.iter().map(|&g| scale * g).collect());
            vec![dx]
        }
        Op::ScalarMul => {
            let ds = needs[0].then(|| {
                vec![inputs[1].data().iter().zip(grad_out).map(|(&x, &g)| x * g).sum()]
            });
            let dx = needs[1].then(|| {
                let a = inputs[0].data()[0];
                grad_out.iter().map(|&g| a * g).collect()
            });
            vec![ds, dx]
        }
        Op::Dot => {
            let g = grad_out[0];
            let da = needs[0].then(|| inputs[1].data().iter().map(|&b| g * b).collect());
            let db = needs[1].then(|| inputs[0].data().iter().map(|&a| g * a).collect());
            vec![da, db]
        }
        Op::Sum => {
            let dx = needs[0].then(|| vec![grad_out[0]; inputs[0].len()]);
            vec![dx]
        }
        Op::SliceCol { col } => {
            let dx = needs[0].then(|| {
                let (f, t_steps) = (inputs[0].shape()[0], inputs[0].shape()[1]);
                let mut dx = vec![0.0; inputs[0].len()];
                for row in 0..f {
                    dx[row * t_steps + col] = grad_out[row];
                }
                dx
            });
            vec![dx]
        }
        Op::StackCols => {
            let t_steps = inputs.len();
            let f = inputs[0].len();
            (0..t_steps)
                .map(|t| {
                    needs[t].then(|| (0..f).map(|row| grad_out[row * t_steps + t]).collect())
                })
                .collect()
        }
        Op::ConcatRows => {
            let split = inputs[0].len();
            let da = needs[0].then(|| grad_out[..split].to_vec());
            let db = needs[1].then(|| grad_out[split..].to_vec());
            vec![da, db]
        }
        Op::Reshape => {
            let dx = needs[0].then(|| grad_out.to_vec());
            vec![dx]
        }
        Op::ChannelNorm { stats } => {
            let (dx, dgain, dbias) =
                channel_norm_backward(inputs[0], inputs[1], stats, grad_out, needs);
            vec![dx, dgain, dbias]
        }
        Op::MseLoss => {
            let g = grad_out[0];
            let m = inputs[0].len() as f64;
            let diff_scaled = |sign: f64| -> Vec<f64> {
                inputs[0]
                    .data()
                    .iter()
                    .zip(inputs[1].data())
                    .map(|(&a, &b)| sign * g * 2.0 * (a - b) / m)
                    .collect()
            };
            let dy_hat = needs[0].then(|| diff_scaled(1.0));
            let dy = needs[1].then(|| diff_scaled(-1.0));
            vec![dy_hat, dy]
        }
        Op::CceLoss => {
            let g = grad_out[0];
            let dz_hat = needs[0].then(|| {
                inputs[0]
                    .data()
                    .iter()
                    .zip(inputs[1].data())
                    .map(|(&p, &t)| -g * t / p)
                    .collect()
            });
            let dz = needs[1].then(|| {
                inputs[0].data().iter().map(|&p| -g * p.ln()).collect()
            });
            vec![dz_hat, dz]
        }
    }
}
