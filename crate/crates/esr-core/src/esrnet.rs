//! The ESRNet super-resolution generator.
//!
//! Layout: a head convolution lifts the single-channel input to
//! `base_channels`, a trunk of residual blocks (conv → activation → conv
//! plus identity skip) refines it, a fusion convolution closes the trunk and
//! receives a global skip from the head output, and for each upsample
//! factor `r` a convolution widens the channels by `r` followed by a
//! subpixel shuffle and activation. A final convolution maps back to one
//! channel. With two upsample factors this yields exactly four trailing
//! convolutions after the residual trunk.

use std::str::FromStr;

use crate::autodiff::{Padding, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::{mix, Lcg64};

/// Trunk and upsampling activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    PRelu,
    Relu,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prelu" => Ok(Activation::PRelu),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsrNetConfig {
    pub base_channels: usize,
    pub n_res_blocks: usize,
    pub head_kernel: usize,
    pub block_kernel: usize,
    /// Staged upsampling; the product must match the target/source rate
    /// ratio of the data it is trained on.
    pub upsample_factors: Vec<usize>,
    pub activation: Activation,
    /// Global skip from the head output to the trunk output.
    pub global_skip: bool,
    /// Insert per-channel normalization after trunk convolutions.
    pub channel_norm: bool,
}

impl Default for EsrNetConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            n_res_blocks: 16,
            head_kernel: 9,
            block_kernel: 3,
            upsample_factors: vec![5, 2],
            activation: Activation::PRelu,
            global_skip: true,
            channel_norm: false,
        }
    }
}

impl EsrNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be at least 1".into()));
        }
        if self.n_res_blocks == 0 {
            return Err(Error::Config("n_res_blocks must be at least 1".into()));
        }
        for (name, k) in [("head_kernel", self.head_kernel), ("block_kernel", self.block_kernel)] {
            if k == 0 || k % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd, got {k}")));
            }
        }
        if self.upsample_factors.is_empty() {
            return Err(Error::Config("upsample_factors must not be empty".into()));
        }
        if self.upsample_factors.iter().any(|&r| r == 0) {
            return Err(Error::Config("upsample factors must be positive".into()));
        }
        Ok(())
    }

    /// Product of the upsample factors: the overall rate multiplier.
    pub fn total_factor(&self) -> usize {
        self.upsample_factors.iter().product()
    }
}

/// A built generator: the configuration plus its named parameters.
#[derive(Clone, Debug)]
pub struct EsrNetModel {
    pub config: EsrNetConfig,
    pub params: ParamSet,
}

/// Uniform init in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
fn init_uniform(rng: &mut Lcg64, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

const PRELU_INIT: f64 = 0.25;

fn push_conv(
    params: &mut ParamSet,
    rng: &mut Lcg64,
    name: &str,
    c_in: usize,
    c_out: usize,
    k: usize,
) -> Result<()> {
    params.push(format!("{name}.w"), init_uniform(rng, &[c_out, c_in, k], c_in * k))?;
    params.push(format!("{name}.b"), Tensor::zeros(&[c_out]))?;
    Ok(())
}

fn push_norm(params: &mut ParamSet, name: &str, channels: usize) -> Result<()> {
    params.push(format!("{name}.gain"), Tensor::from_vec(&[channels], vec![1.0; channels])?)?;
    params.push(format!("{name}.bias"), Tensor::zeros(&[channels]))?;
    Ok(())
}

/// Builds a seeded generator. Identical `(config, seed)` produce identical
/// parameters.
pub fn build_esrnet(config: &EsrNetConfig, seed: u64) -> Result<EsrNetModel> {
    config.validate()?;
    let mut rng = Lcg64::new(mix(seed, 0xE5));
    let mut params = ParamSet::new();
    let c = config.base_channels;
    let prelu = config.activation == Activation::PRelu;

    push_conv(&mut params, &mut rng, "head", 1, c, config.head_kernel)?;
    if prelu {
        params.push("head.act", Tensor::scalar(PRELU_INIT))?;
    }
    for i in 0..config.n_res_blocks {
        push_conv(&mut params, &mut rng, &format!("block{i}.conv1"), c, c, config.block_kernel)?;
        if config.channel_norm {
            push_norm(&mut params, &format!("block{i}.norm1"), c)?;
        }
        if prelu {
            params.push(format!("block{i}.act"), Tensor::scalar(PRELU_INIT))?;
        }
        push_conv(&mut params, &mut rng, &format!("block{i}.conv2"), c, c, config.block_kernel)?;
        if config.channel_norm {
            push_norm(&mut params, &format!("block{i}.norm2"), c)?;
        }
    }
    push_conv(&mut params, &mut rng, "fusion", c, c, config.block_kernel)?;
    if config.channel_norm {
        push_norm(&mut params, "fusion.norm", c)?;
    }
    for (j, &r) in config.upsample_factors.iter().enumerate() {
        push_conv(&mut params, &mut rng, &format!("up{j}"), c, c * r, config.block_kernel)?;
        if prelu {
            params.push(format!("up{j}.act"), Tensor::scalar(PRELU_INIT))?;
        }
    }
    push_conv(&mut params, &mut rng, "out", c, 1, config.head_kernel)?;

    Ok(EsrNetModel { config: config.clone(), params })
}

impl EsrNetModel {
    /// Rebinds a loaded parameter set, verifying names and shapes against
    /// the configuration's layout.
    pub fn from_params(config: &EsrNetConfig, params: ParamSet) -> Result<Self> {
        let reference = build_esrnet(config, 0)?;
        if reference.params.len() != params.len() {
            return Err(Error::Invalid(format!(
                "checkpoint has {} parameters, config wants {}",
                params.len(),
                reference.params.len()
            )));
        }
        for ((want_name, want), (got_name, got)) in reference.params.iter().zip(params.iter()) {
            if want_name != got_name || want.shape() != got.shape() {
                return Err(Error::Invalid(format!(
                    "checkpoint parameter {got_name:?} {:?} does not match layout {want_name:?} {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        Ok(Self { config: config.clone(), params })
    }

    /// Total scalar values across all parameters.
    pub fn param_count(&self) -> usize {
        self.params.total_values()
    }

    /// Records the generator forward pass on `tape`; `vars` are the
    /// parameters of `params` in registration order. Exposed separately
    /// from `&self` so training loops can hold the parameter set mutably.
    pub fn forward_with(
        config: &EsrNetConfig,
        params: &ParamSet,
        tape: &mut Tape,
        x: Var,
        vars: &[Var],
    ) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 2 || shape[0] != 1 {
            return Err(Error::Shape(format!(
                "generator input must be (1, L), got {shape:?}"
            )));
        }
        if shape[1] < config.block_kernel {
            return Err(Error::Invalid(format!(
                "input length {} shorter than the block kernel {}",
                shape[1], config.block_kernel
            )));
        }
        let conv = |tape: &mut Tape, x: Var, name: &str| -> Result<Var> {
            let w = vars[params.index_of(&format!("{name}.w"))?];
            let b = vars[params.index_of(&format!("{name}.b"))?];
            tape.conv1d(x, w, b, Padding::SameZero, 1)
        };
        let activation = |tape: &mut Tape, x: Var, slope_name: &str| -> Result<Var> {
            match config.activation {
                Activation::Relu => Ok(tape.relu(x)),
                Activation::PRelu => {
                    let slope = vars[params.index_of(slope_name)?];
                    tape.prelu(x, slope)
                }
            }
        };
        let norm = |tape: &mut Tape, x: Var, name: &str| -> Result<Var> {
            if !config.channel_norm {
                return Ok(x);
            }
            let gain = vars[params.index_of(&format!("{name}.gain"))?];
            let bias = vars[params.index_of(&format!("{name}.bias"))?];
            tape.channel_norm(x, gain, bias)
        };

        let head = conv(tape, x, "head")?;
        let head = activation(tape, head, "head.act")?;

        let mut t = head;
        for i in 0..config.n_res_blocks {
            let c1 = conv(tape, t, &format!("block{i}.conv1"))?;
            let c1 = norm(tape, c1, &format!("block{i}.norm1"))?;
            let a = activation(tape, c1, &format!("block{i}.act"))?;
            let c2 = conv(tape, a, &format!("block{i}.conv2"))?;
            let c2 = norm(tape, c2, &format!("block{i}.norm2"))?;
            t = tape.add(t, c2)?;
        }
        let mut fused = conv(tape, t, "fusion")?;
        fused = norm(tape, fused, "fusion.norm")?;
        if config.global_skip {
            fused = tape.add(fused, head)?;
        }

        let mut y = fused;
        for (j, &r) in config.upsample_factors.iter().enumerate() {
            let widened = conv(tape, y, &format!("up{j}"))?;
            let shuffled = tape.subpixel_shuffle(widened, r)?;
            y = activation(tape, shuffled, &format!("up{j}.act"))?;
        }
        conv(tape, y, "out")
    }

    /// Records the generator forward pass on `tape` using this model's
    /// parameters.
    pub fn forward_on(&self, tape: &mut Tape, x: Var, vars: &[Var]) -> Result<Var> {
        Self::forward_with(&self.config, &self.params, tape, x, vars)
    }

    /// Inference-only super-resolution pass: `(1, L) -> (1, L × Π factors)`.
    pub fn sr_forward(&self, x_low: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.constants_on(&mut tape);
        let x = tape.constant(x_low.clone());
        let y = self.forward_on(&mut tape, x, &vars)?;
        let out = tape.value(y);
        if !out.all_finite() {
            return Err(Error::Invalid("non-finite values in generator output".into()));
        }
        Ok(out.clone())
    }
}
