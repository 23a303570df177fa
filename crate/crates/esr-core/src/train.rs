//! Joint loss, training loops for the judge and the generator, and the
//! 10-fold cross-validation driver.
//!
//! Run directory layout, one subdirectory per fold:
//!
//! ```text
//! <run>/fold_<k>/checkpoint.txt    best model of the fold
//! <run>/fold_<k>/epochs.csv        epoch, train loss, validation metric
//! <run>/fold_<k>/test_report.json  test-fold metrics of the best model
//! <run>/summary.json               per-fold reports plus median aggregates
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamState, Tape, Tensor, Var};
use crate::data::{CaLabel, EcgRecording, FoldPlan};
use crate::error::{Error, Result};
use crate::esrnet::{build_esrnet, EsrNetConfig, EsrNetModel};
use crate::judge::{build_judge, JudgeConfig, JudgeModel};
use crate::metrics::{confusion, f1_report, median, F1Report};
use crate::params::ParamSet;
use crate::rng::{mix, Lcg64};

// ── Loss weighting ───────────────────────────────────────────────────────────

/// The γ weight between reconstruction and classification loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub gamma: f64,
}

impl LossWeights {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Invalid(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Named γ conditions: pure classification (γ=0), pure reconstruction
/// (γ=1), and the half mixture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaPreset {
    Lc,
    Lr,
    Lj,
}

impl GammaPreset {
    pub const ALL: [GammaPreset; 3] = [GammaPreset::Lc, GammaPreset::Lr, GammaPreset::Lj];

    pub fn gamma(self) -> f64 {
        match self {
            GammaPreset::Lc => 0.0,
            GammaPreset::Lr => 1.0,
            GammaPreset::Lj => 0.5,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            GammaPreset::Lc => "LC",
            GammaPreset::Lr => "LR",
            GammaPreset::Lj => "LJ",
        }
    }

    pub fn weights(self) -> LossWeights {
        LossWeights { gamma: self.gamma() }
    }
}

impl FromStr for GammaPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GammaPreset::ALL
            .iter()
            .copied()
            .find(|p| p.token() == s)
            .ok_or_else(|| Error::Config(format!("unknown gamma preset {s:?}, expected LC/LR/LJ")))
    }
}

/// The γ combination itself: `γ·L_R + (1-γ)·L_C`.
pub fn combine_losses(gamma: f64, l_r: f64, l_c: f64) -> f64 {
    gamma * l_r + (1.0 - gamma) * l_c
}

// ── Train configuration ──────────────────────────────────────────────────────

/// Which validation metric selects the best epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMetric {
    /// Maximize macro F1 on the validation fold.
    ValOverallF1,
    /// Minimize the mean validation loss (CCE for the judge phase, joint
    /// loss for the generator phase).
    ValJointLoss,
}

impl FromStr for SelectionMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val_overall_f1" => Ok(SelectionMetric::ValOverallF1),
            "val_joint_loss" => Ok(SelectionMetric::ValJointLoss),
            other => Err(Error::Config(format!("unknown selection metric {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub selection: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 42,
            selection: SelectionMetric::ValOverallF1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

// ── Tensors from recordings ──────────────────────────────────────────────────

/// `(1, L)` signal tensor from a recording.
pub fn signal_tensor(rec: &EcgRecording) -> Tensor {
    Tensor::from_vec(&[1, rec.samples.len()], rec.samples.clone()).expect("recording non-empty")
}

fn one_hot(label: CaLabel) -> Tensor {
    let mut v = vec![0.0; CaLabel::COUNT];
    v[label.index()] = 1.0;
    Tensor::vector(v)
}

// ── Joint loss ───────────────────────────────────────────────────────────────

/// Records `γ·MSE(ŷ, y) + (1-γ)·CCE(judge(ŷ), judge(y))` on the tape. The
/// judge variables must be constants of a frozen judge; gradients flow into
/// `y_hat` through both terms and never into the judge.
pub fn joint_loss_on(
    tape: &mut Tape,
    y_hat: Var,
    y: Var,
    judge: &JudgeModel,
    judge_vars: &[Var],
    weights: LossWeights,
) -> Result<Var> {
    let gamma = weights.gamma;
    if gamma == 1.0 {
        return tape.mse_loss(y_hat, y);
    }
    let z_hat = judge.forward_on(tape, y_hat, judge_vars)?;
    let z = judge.forward_on(tape, y, judge_vars)?;
    let l_c = tape.cce_loss(z_hat, z)?;
    if gamma == 0.0 {
        return Ok(l_c);
    }
    let l_r = tape.mse_loss(y_hat, y)?;
    let weighted_r = tape.affine(l_r, gamma, 0.0);
    let weighted_c = tape.affine(l_c, 1.0 - gamma, 0.0);
    tape.add(weighted_r, weighted_c)
}

/// The joint loss as a plain value; see [`joint_loss_on`].
pub fn joint_loss(
    y_hat: &Tensor,
    y: &Tensor,
    judge: &JudgeModel,
    weights: LossWeights,
) -> Result<f64> {
    if !judge.frozen {
        return Err(Error::Invalid("joint loss requires a frozen judge".into()));
    }
    if y_hat.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "joint loss length mismatch: {:?} vs {:?}",
            y_hat.shape(),
            y.shape()
        )));
    }
    let mut tape = Tape::new();
    let judge_vars = judge.params.constants_on(&mut tape);
    let yh = tape.constant(y_hat.clone());
    let yv = tape.constant(y.clone());
    let loss = joint_loss_on(&mut tape, yh, yv, judge, &judge_vars, weights)?;
    tape.value(loss).scalar_value()
}

// ── Epoch log ────────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

fn write_epoch_csv(path: &Path, rows: &[EpochRow]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_metric\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_metric));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Tracks the best epoch under the selection rule with earliest-epoch ties.
struct BestTracker {
    maximize: bool,
    best_metric: f64,
    best_epoch: usize,
    best_params: Option<ParamSet>,
}

impl BestTracker {
    fn new(maximize: bool) -> Self {
        Self {
            maximize,
            best_metric: if maximize { f64::NEG_INFINITY } else { f64::INFINITY },
            best_epoch: 0,
            best_params: None,
        }
    }

    fn offer(&mut self, epoch: usize, metric: f64, params: &ParamSet) {
        let improves = if self.maximize {
            metric > self.best_metric
        } else {
            metric < self.best_metric
        };
        if improves || self.best_params.is_none() {
            self.best_metric = metric;
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
        }
    }
}

// ── Judge training ───────────────────────────────────────────────────────────

#[derive(Debug)]
pub struct JudgeTrainOutcome {
    /// Best-epoch model, not yet frozen.
    pub model: JudgeModel,
    pub best_epoch: usize,
    pub epoch_log: Vec<EpochRow>,
    pub warnings: Vec<String>,
}

/// Macro F1 of a judge over labeled recordings.
pub fn judge_macro_f1(model: &JudgeModel, recs: &[&EcgRecording]) -> Result<f64> {
    let mut preds = Vec::with_capacity(recs.len());
    let mut truths = Vec::with_capacity(recs.len());
    for rec in recs {
        preds.push(model.predict_label(&signal_tensor(rec))?);
        truths.push(rec.label);
    }
    Ok(f1_report(&confusion(&preds, &truths)?).overall_f1)
}

fn judge_mean_cce(model: &JudgeModel, recs: &[&EcgRecording]) -> Result<f64> {
    let mut total = 0.0;
    for rec in recs {
        let mut tape = Tape::new();
        let vars = model.params.constants_on(&mut tape);
        let x = tape.constant(signal_tensor(rec));
        let probs = model.forward_on(&mut tape, x, &vars)?;
        let z = tape.constant(one_hot(rec.label));
        let loss = tape.cce_loss(probs, z)?;
        total += tape.value(loss).scalar_value()?;
    }
    Ok(total / recs.len() as f64)
}

/// Accumulates parameter gradients of `loss_of(sample)` over a batch and
/// applies one Adam step on their mean. Returns the summed loss.
fn batch_step<T, F>(
    params: &mut ParamSet,
    adam: &mut AdamState,
    batch: &[&T],
    mut loss_of: F,
) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamSet, &[Var], &T) -> Result<Var>,
{
    let mut grads: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
    let mut loss_sum = 0.0;
    for sample in batch {
        let mut tape = Tape::new();
        let vars = params.leaves_on(&mut tape);
        let loss = loss_of(&mut tape, params, &vars, sample)?;
        tape.backward(loss)?;
        loss_sum += tape.value(loss).scalar_value()?;
        for (g, v) in grads.iter_mut().zip(&vars) {
            let sample_grad = tape.grad(*v).ok_or_else(|| {
                Error::Invalid("parameter missing gradient after backward".into())
            })?;
            for (acc, s) in g.iter_mut().zip(sample_grad) {
                *acc += s;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        for v in g.iter_mut() {
            *v *= scale;
        }
    }
    adam_step(params, &grads, adam)?;
    Ok(loss_sum)
}

/// Trains a judge with Adam on one-hot CCE and picks the epoch with the
/// best validation metric (earliest epoch on ties).
pub fn train_judge(
    train: &[&EcgRecording],
    val: &[&EcgRecording],
    judge_config: &JudgeConfig,
    config: &TrainConfig,
) -> Result<JudgeTrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Invalid("judge training needs non-empty train and validation sets".into()));
    }
    let mut warnings = Vec::new();
    let first_label = train[0].label;
    if train.iter().all(|r| r.label == first_label) {
        warnings.push(format!(
            "training set contains only the {first_label} class; the classifier cannot learn others"
        ));
    }

    let mut model = build_judge(judge_config, mix(config.seed, 0xB0))?;
    let mut adam = AdamState::new(config.learning_rate, &model.params);
    let maximize = config.selection == SelectionMetric::ValOverallF1;
    let mut best = BestTracker::new(maximize);
    let mut epoch_log = Vec::with_capacity(config.epochs);

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        Lcg64::new(mix(config.seed, 1000 + epoch as u64)).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EcgRecording> = chunk.iter().map(|&i| train[i]).collect();
            loss_sum += batch_step(
                &mut model.params,
                &mut adam,
                &batch,
                |tape, params, vars, rec| {
                    let x = tape.constant(signal_tensor(rec));
                    let probs = JudgeModel::forward_with(judge_config, params, tape, x, vars)?;
                    let z = tape.constant(one_hot(rec.label));
                    tape.cce_loss(probs, z)
                },
            )?;
        }
        let val_metric = match config.selection {
            SelectionMetric::ValOverallF1 => judge_macro_f1(&model, val)?,
            SelectionMetric::ValJointLoss => judge_mean_cce(&model, val)?,
        };
        best.offer(epoch, val_metric, &model.params);
        epoch_log.push(EpochRow {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_metric,
        });
    }

    let best_epoch = best.best_epoch;
    let best_params = best.best_params.expect("at least one epoch ran");
    let model = JudgeModel::from_params(judge_config, best_params, false)?;
    Ok(JudgeTrainOutcome {
        model,
        best_epoch,
        epoch_log,
        warnings,
    })
}

// ── Generator training ───────────────────────────────────────────────────────

/// One aligned low/high-rate training pair.
#[derive(Clone, Debug)]
pub struct SrPair {
    pub id: String,
    pub label: CaLabel,
    pub low: Tensor,
    pub high: Tensor,
}

impl SrPair {
    /// Pairs a low-rate input with its high-rate original, checking id,
    /// rate ratio, and exact length ratio against the model factor.
    pub fn new(low: &EcgRecording, high: &EcgRecording, total_factor: usize) -> Result<Self> {
        if low.id != high.id {
            return Err(Error::Invalid(format!(
                "unpaired samples: low id {:?} vs high id {:?}",
                low.id, high.id
            )));
        }
        let ratio = high.fs / low.fs;
        if (ratio - total_factor as f64).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "fs ratio {ratio} of pair {:?} does not match the model upsample factor {total_factor}",
                low.id
            )));
        }
        if high.samples.len() != low.samples.len() * total_factor {
            return Err(Error::Invalid(format!(
                "length ratio of pair {:?} is {} / {}, expected factor {total_factor}",
                low.id,
                high.samples.len(),
                low.samples.len()
            )));
        }
        Ok(Self {
            id: low.id.clone(),
            label: high.label,
            low: signal_tensor(low),
            high: signal_tensor(high),
        })
    }
}

#[derive(Debug)]
pub struct SrTrainOutcome {
    pub model: EsrNetModel,
    pub best_epoch: usize,
    pub epoch_log: Vec<EpochRow>,
}

fn sr_val_metric(
    model: &EsrNetModel,
    judge: &JudgeModel,
    pairs: &[&SrPair],
    weights: LossWeights,
    selection: SelectionMetric,
) -> Result<f64> {
    match selection {
        SelectionMetric::ValJointLoss => {
            let mut total = 0.0;
            for pair in pairs {
                let y_hat = model.sr_forward(&pair.low)?;
                total += joint_loss(&y_hat, &pair.high, judge, weights)?;
            }
            Ok(total / pairs.len() as f64)
        }
        SelectionMetric::ValOverallF1 => {
            let mut preds = Vec::new();
            let mut truths = Vec::new();
            for pair in pairs {
                let y_hat = model.sr_forward(&pair.low)?;
                preds.push(judge.predict_label(&y_hat)?);
                truths.push(pair.label);
            }
            Ok(f1_report(&confusion(&preds, &truths)?).overall_f1)
        }
    }
}

/// Trains the generator against a frozen judge by minimizing the joint loss
/// over the training pairs; per-epoch validation selects the checkpoint.
/// Judge parameters are bit-identical before and after.
pub fn train_esrnet(
    train: &[SrPair],
    val: &[SrPair],
    judge: &JudgeModel,
    esr_config: &EsrNetConfig,
    weights: LossWeights,
    config: &TrainConfig,
) -> Result<SrTrainOutcome> {
    config.validate()?;
    if !judge.frozen {
        return Err(Error::Invalid("generator training requires a frozen judge".into()));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Invalid("generator training needs non-empty train and validation sets".into()));
    }
    let factor = esr_config.total_factor();
    for pair in train.iter().chain(val) {
        let (l_low, l_high) = (pair.low.shape()[1], pair.high.shape()[1]);
        if l_high != l_low * factor {
            return Err(Error::Invalid(format!(
                "pair {:?} has length ratio {l_high} / {l_low}, model factors multiply to {factor}",
                pair.id
            )));
        }
    }

    let mut model = build_esrnet(esr_config, mix(config.seed, 0xB1))?;
    let mut adam = AdamState::new(config.learning_rate, &model.params);
    let maximize = config.selection == SelectionMetric::ValOverallF1;
    let mut best = BestTracker::new(maximize);
    let mut epoch_log = Vec::with_capacity(config.epochs);

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        Lcg64::new(mix(config.seed, 2000 + epoch as u64)).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SrPair> = chunk.iter().map(|&i| &train[i]).collect();
            loss_sum += batch_step(
                &mut model.params,
                &mut adam,
                &batch,
                |tape, params, vars, pair| {
                    let judge_vars = judge.params.constants_on(tape);
                    let x = tape.constant(pair.low.clone());
                    let y = tape.constant(pair.high.clone());
                    let y_hat = EsrNetModel::forward_with(esr_config, params, tape, x, vars)?;
                    joint_loss_on(tape, y_hat, y, judge, &judge_vars, weights)
                },
            )?;
        }
        let val_refs: Vec<&SrPair> = val.iter().collect();
        let val_metric = sr_val_metric(&model, judge, &val_refs, weights, config.selection)?;
        best.offer(epoch, val_metric, &model.params);
        epoch_log.push(EpochRow {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_metric,
        });
    }

    let best_epoch = best.best_epoch;
    let model = EsrNetModel::from_params(esr_config, best.best_params.expect("epochs ran"))?;
    Ok(SrTrainOutcome {
        model,
        best_epoch,
        epoch_log,
    })
}

// ── Cross-validation driver ──────────────────────────────────────────────────

/// What to train in each fold.
pub enum CvRecipe<'a> {
    Judge {
        config: &'a JudgeConfig,
    },
    EsrNet {
        config: &'a EsrNetConfig,
        weights: LossWeights,
        /// Completed judge run at the target rate; fold `k` loads
        /// `fold_<k>/checkpoint.txt` as its frozen judge.
        judge_run: &'a Path,
        judge_config: &'a JudgeConfig,
        /// Low-rate inputs keyed by id, aligned with `records`.
        low: &'a BTreeMap<String, EcgRecording>,
    },
}

/// Mean test-set losses of a generator fold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrTestLosses {
    pub joint: f64,
    pub mse: f64,
    pub cce: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub best_epoch: usize,
    /// Judge recipe: test-fold F1 of the best judge. Generator recipe:
    /// test-fold F1 of the frozen judge on reconstructions.
    pub f1: F1Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sr_losses: Option<SrTestLosses>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// Median across folds, per class (index order of the classes).
    pub median_per_class_f1: Vec<f64>,
    pub median_overall_f1: f64,
}

pub struct CvOptions {
    pub out_dir: PathBuf,
    /// Worker threads for fold parallelism; 0 means one per fold.
    pub jobs: usize,
}

fn gather<'a>(
    records: &'a BTreeMap<String, EcgRecording>,
    ids: &[String],
) -> Result<Vec<&'a EcgRecording>> {
    ids.iter()
        .map(|id| {
            records
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("fold plan id {id:?} missing from the dataset")))
        })
        .collect()
}

fn sr_pairs(
    low: &BTreeMap<String, EcgRecording>,
    high: &BTreeMap<String, EcgRecording>,
    ids: &[String],
    factor: usize,
) -> Result<Vec<SrPair>> {
    ids.iter()
        .map(|id| {
            let l = low
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("id {id:?} missing from the low-rate dataset")))?;
            let h = high
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("id {id:?} missing from the high-rate dataset")))?;
            SrPair::new(l, h, factor)
        })
        .collect()
}

fn run_fold(
    fold: usize,
    records: &BTreeMap<String, EcgRecording>,
    plan: &FoldPlan,
    recipe: &CvRecipe,
    config: &TrainConfig,
    out_dir: &Path,
) -> Result<(FoldResult, Vec<String>)> {
    let split = plan.split_for_test_fold(fold)?;
    let fold_dir = out_dir.join(format!("fold_{fold}"));
    std::fs::create_dir_all(&fold_dir)?;
    let fold_config = TrainConfig {
        seed: mix(config.seed, fold as u64),
        ..*config
    };

    let (result, epoch_log, warnings) = match recipe {
        CvRecipe::Judge { config: judge_config } => {
            let train_recs = gather(records, &split.train)?;
            let val_recs = gather(records, &split.validation)?;
            let test_recs = gather(records, &split.test)?;
            let outcome = train_judge(&train_recs, &val_recs, judge_config, &fold_config)?;
            let mut preds = Vec::new();
            let mut truths = Vec::new();
            for rec in &test_recs {
                preds.push(outcome.model.predict_label(&signal_tensor(rec))?);
                truths.push(rec.label);
            }
            let f1 = f1_report(&confusion(&preds, &truths)?);
            crate::checkpoint::save(&fold_dir.join("checkpoint.txt"), &outcome.model.params, true)?;
            (
                FoldResult {
                    fold,
                    best_epoch: outcome.best_epoch,
                    f1,
                    sr_losses: None,
                },
                outcome.epoch_log,
                outcome.warnings,
            )
        }
        CvRecipe::EsrNet {
            config: esr_config,
            weights,
            judge_run,
            judge_config,
            low,
        } => {
            let ckpt = judge_run.join(format!("fold_{fold}")).join("checkpoint.txt");
            if !ckpt.exists() {
                return Err(Error::Missing(format!(
                    "judge checkpoint {} (run train-judge at the target rate first)",
                    ckpt.display()
                )));
            }
            let judge = JudgeModel::load(&ckpt, judge_config)?;
            if !judge.frozen {
                return Err(Error::Invalid(format!(
                    "judge checkpoint {} is not marked frozen",
                    ckpt.display()
                )));
            }
            let factor = esr_config.total_factor();
            let train_pairs = sr_pairs(low, records, &split.train, factor)?;
            let val_pairs = sr_pairs(low, records, &split.validation, factor)?;
            let test_pairs = sr_pairs(low, records, &split.test, factor)?;
            let outcome =
                train_esrnet(&train_pairs, &val_pairs, &judge, esr_config, *weights, &fold_config)?;

            let mut preds = Vec::new();
            let mut truths = Vec::new();
            let (mut joint_sum, mut mse_sum, mut cce_sum) = (0.0, 0.0, 0.0);
            for pair in &test_pairs {
                let y_hat = outcome.model.sr_forward(&pair.low)?;
                preds.push(judge.predict_label(&y_hat)?);
                truths.push(pair.label);
                mse_sum += joint_loss(&y_hat, &pair.high, &judge, LossWeights { gamma: 1.0 })?;
                cce_sum += joint_loss(&y_hat, &pair.high, &judge, LossWeights { gamma: 0.0 })?;
                joint_sum += joint_loss(&y_hat, &pair.high, &judge, *weights)?;
            }
            let n = test_pairs.len() as f64;
            let f1 = f1_report(&confusion(&preds, &truths)?);
            crate::checkpoint::save(&fold_dir.join("checkpoint.txt"), &outcome.model.params, false)?;
            (
                FoldResult {
                    fold,
                    best_epoch: outcome.best_epoch,
                    f1,
                    sr_losses: Some(SrTestLosses {
                        joint: joint_sum / n,
                        mse: mse_sum / n,
                        cce: cce_sum / n,
                    }),
                },
                outcome.epoch_log,
                Vec::new(),
            )
        }
    };

    write_epoch_csv(&fold_dir.join("epochs.csv"), &epoch_log)?;
    let report = serde_json::to_string_pretty(&result)
        .map_err(|e| Error::Invalid(format!("serializing fold report: {e}")))?;
    std::fs::write(fold_dir.join("test_report.json"), report + "\n")?;
    Ok((result, warnings))
}

/// Runs the full rotation: for each test fold, trains on the remaining
/// folds (validation fold `(k+1) mod n`), evaluates on the test fold, and
/// aggregates per-class and overall medians across folds. Folds run in
/// parallel worker threads and write only inside their own subdirectory.
pub fn run_cv(
    records: &BTreeMap<String, EcgRecording>,
    plan: &FoldPlan,
    recipe: &CvRecipe,
    config: &TrainConfig,
    options: &CvOptions,
) -> Result<CvResult> {
    config.validate()?;
    for id in plan.ids() {
        if !records.contains_key(id) {
            return Err(Error::Invalid(format!(
                "fold plan covers id {id:?} which is missing from the dataset"
            )));
        }
    }
    if records.len() != plan.ids().count() {
        return Err(Error::Invalid(format!(
            "dataset has {} records but the fold plan covers {}",
            records.len(),
            plan.ids().count()
        )));
    }
    std::fs::create_dir_all(&options.out_dir)?;

    let threads = if options.jobs == 0 { plan.n_folds } else { options.jobs };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.min(plan.n_folds).max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;

    use rayon::prelude::*;
    let fold_outputs: Vec<Result<(FoldResult, Vec<String>)>> = pool.install(|| {
        (0..plan.n_folds)
            .into_par_iter()
            .map(|fold| run_fold(fold, records, plan, recipe, config, &options.out_dir))
            .collect()
    });

    let mut folds = Vec::with_capacity(plan.n_folds);
    for output in fold_outputs {
        let (result, warnings) = output?;
        for w in warnings {
            eprintln!("warning: fold {}: {w}", result.fold);
        }
        folds.push(result);
    }
    folds.sort_by_key(|f| f.fold);

    let median_per_class_f1 = (0..CaLabel::COUNT)
        .map(|j| {
            let scores: Vec<f64> = folds.iter().map(|f| f.f1.per_class[j].f1).collect();
            median(&scores)
        })
        .collect::<Result<Vec<f64>>>()?;
    let overall: Vec<f64> = folds.iter().map(|f| f.f1.overall_f1).collect();
    let result = CvResult {
        folds,
        median_per_class_f1,
        median_overall_f1: median(&overall)?,
    };

    let summary = serde_json::to_string_pretty(&result)
        .map_err(|e| Error::Invalid(format!("serializing summary: {e}")))?;
    std::fs::write(options.out_dir.join("summary.json"), summary + "\n")?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LeadId, SyntheticEcgParams, WindowPolicy};
    use crate::judge::JudgeBlockConfig;
    use crate::synth::synth_ecg_as;

    fn tiny_judge_config() -> JudgeConfig {
        let block = |c: usize, pool: usize| JudgeBlockConfig {
            conv1_channels: c,
            conv1_kernel: 3,
            conv2_channels: c,
            conv2_kernel: 3,
            pool_size: pool,
            pool_stride: pool,
        };
        JudgeConfig {
            blocks: vec![block(4, 2), block(4, 2), block(4, 2), block(4, 1), block(4, 1)],
            gru_hidden: 4,
            attention_dim: 4,
        }
    }

    fn tiny_esr_config(factors: Vec<usize>) -> EsrNetConfig {
        EsrNetConfig {
            base_channels: 4,
            n_res_blocks: 2,
            head_kernel: 3,
            block_kernel: 3,
            upsample_factors: factors,
            ..EsrNetConfig::default()
        }
    }

    fn frozen_tiny_judge(seed: u64) -> JudgeModel {
        let mut judge = build_judge(&tiny_judge_config(), seed).unwrap();
        judge.freeze();
        judge
    }

    /// Separable synthetic recordings: `n` records cycling the classes.
    fn synth_set(n: usize, fs: f64, duration: f64, seed: u64) -> Vec<EcgRecording> {
        (0..n)
            .map(|i| {
                let class = CaLabel::ALL[i % CaLabel::COUNT];
                let params = SyntheticEcgParams {
                    heart_rate_bpm: 55.0 + 20.0 * Lcg64::new(mix(seed, i as u64)).next_f64(),
                    fs,
                    duration_s: duration,
                    class,
                    noise_mv: 0.01,
                };
                let rec =
                    synth_ecg_as(&params, mix(seed, 5000 + i as u64), &format!("rec{i:03}"), LeadId::II)
                        .unwrap();
                crate::data::window_signal(&rec, duration, WindowPolicy::PadZeroTail).unwrap()
            })
            .collect()
    }

    fn rand_signal(rng: &mut Lcg64, l: usize) -> Tensor {
        Tensor::from_vec(&[1, l], (0..l).map(|_| rng.uniform(-0.8, 0.8)).collect()).unwrap()
    }

    #[test]
    fn gamma_presets_map_to_weights() {
        assert_eq!("LC".parse::<GammaPreset>().unwrap().gamma(), 0.0);
        assert_eq!("LR".parse::<GammaPreset>().unwrap().gamma(), 1.0);
        assert_eq!("LJ".parse::<GammaPreset>().unwrap().gamma(), 0.5);
        assert!("LX".parse::<GammaPreset>().is_err());
        assert!(LossWeights::new(1.5).is_err());
        assert!(LossWeights::new(-0.1).is_err());
    }

    #[test]
    fn combine_losses_hand_arithmetic() {
        assert_eq!(combine_losses(0.5, 2.0, 4.0), 3.0);
        assert_eq!(combine_losses(1.0, 2.0, 4.0), 2.0);
        assert_eq!(combine_losses(0.0, 2.0, 4.0), 4.0);
    }

    #[test]
    fn joint_loss_reduces_to_mse_at_gamma_one() {
        let judge = frozen_tiny_judge(1);
        let mut rng = Lcg64::new(2);
        let y_hat = rand_signal(&mut rng, 64);
        let y = rand_signal(&mut rng, 64);
        let joint = joint_loss(&y_hat, &y, &judge, LossWeights { gamma: 1.0 }).unwrap();
        let mut tape = Tape::new();
        let a = tape.constant(y_hat.clone());
        let b = tape.constant(y.clone());
        let mse = tape.mse_loss(a, b).unwrap();
        assert_eq!(joint, tape.value(mse).scalar_value().unwrap());
    }

    #[test]
    fn joint_loss_reduces_to_cce_at_gamma_zero() {
        let judge = frozen_tiny_judge(3);
        let mut rng = Lcg64::new(4);
        let y_hat = rand_signal(&mut rng, 64);
        let y = rand_signal(&mut rng, 64);
        let joint = joint_loss(&y_hat, &y, &judge, LossWeights { gamma: 0.0 }).unwrap();
        let z_hat = judge.classify(&y_hat).unwrap();
        let z = judge.classify(&y).unwrap();
        let cce: f64 = -z
            .probs()
            .iter()
            .zip(z_hat.probs())
            .map(|(&t, &p)| t * p.ln())
            .sum::<f64>();
        assert!((joint - cce).abs() < 1e-12);
    }

    #[test]
    fn joint_loss_is_affine_in_gamma() {
        let judge = frozen_tiny_judge(5);
        let mut rng = Lcg64::new(6);
        for _ in 0..100 {
            let y_hat = rand_signal(&mut rng, 32);
            let y = rand_signal(&mut rng, 32);
            let gamma = rng.next_f64();
            let at = |g: f64| joint_loss(&y_hat, &y, &judge, LossWeights { gamma: g }).unwrap();
            let lhs = at(gamma);
            let rhs = gamma * at(1.0) + (1.0 - gamma) * at(0.0);
            assert!((lhs - rhs).abs() < 1e-9, "gamma {gamma}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn joint_loss_rejects_unfrozen_judge_and_mismatched_lengths() {
        let judge = build_judge(&tiny_judge_config(), 1).unwrap();
        let mut rng = Lcg64::new(7);
        let y_hat = rand_signal(&mut rng, 64);
        let y = rand_signal(&mut rng, 64);
        assert!(joint_loss(&y_hat, &y, &judge, LossWeights { gamma: 0.5 }).is_err());
        let frozen = frozen_tiny_judge(1);
        let short = rand_signal(&mut rng, 32);
        assert!(joint_loss(&y_hat, &short, &frozen, LossWeights { gamma: 0.5 }).is_err());
    }

    #[test]
    fn joint_loss_gradients_match_finite_differences() {
        use crate::autodiff::grad_check;
        let judge = frozen_tiny_judge(8);
        let esr_config = tiny_esr_config(vec![2]);
        let model = build_esrnet(&esr_config, 9).unwrap();
        let mut rng = Lcg64::new(10);
        let low = rand_signal(&mut rng, 16);
        let high = rand_signal(&mut rng, 32);
        for gamma in [0.0, 0.5, 1.0] {
            let weights = LossWeights { gamma };
            let mut tape = Tape::new();
            let vars = model.params.leaves_on(&mut tape);
            let judge_vars = judge.params.constants_on(&mut tape);
            let x = tape.constant(low.clone());
            let y = tape.constant(high.clone());
            let y_hat = model.forward_on(&mut tape, x, &vars).unwrap();
            let loss = joint_loss_on(&mut tape, y_hat, y, &judge, &judge_vars, weights).unwrap();
            tape.backward(loss).unwrap();
            let analytic: Vec<Vec<f64>> =
                vars.iter().map(|v| tape.grad(*v).unwrap().to_vec()).collect();

            let tensors: Vec<Tensor> = model.params.tensors().to_vec();
            let eval = |ps: &[Tensor]| -> Result<f64> {
                let mut probe = model.clone();
                for (t, p) in probe.params.tensors_mut().iter_mut().zip(ps) {
                    *t = p.clone();
                }
                let y_hat = probe.sr_forward(&low)?;
                joint_loss(&y_hat, &high, &judge, weights)
            };
            let err = grad_check(eval, &tensors, &analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "gamma {gamma}: fd error {err}");
        }
    }

    #[test]
    fn judge_stays_frozen_through_generator_training() {
        let judge = frozen_tiny_judge(11);
        let before = judge.params.clone();
        let recs = synth_set(8, 32.0, 4.0, 21);
        let factor = 2;
        let pairs: Vec<SrPair> = recs
            .iter()
            .map(|r| {
                let spec = crate::resample::ResampleSpec::auto(r.fs, r.fs / factor as f64).unwrap();
                let low = crate::resample::downsample(r, &spec).unwrap();
                SrPair::new(&low, r, factor).unwrap()
            })
            .collect();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 4,
            selection: SelectionMetric::ValJointLoss,
            ..TrainConfig::default()
        };
        let outcome = train_esrnet(
            &pairs[..6],
            &pairs[6..],
            &judge,
            &tiny_esr_config(vec![2]),
            LossWeights { gamma: 0.5 },
            &config,
        )
        .unwrap();
        assert_eq!(judge.params, before);
        assert_eq!(outcome.epoch_log.len(), 2);
    }

    #[test]
    fn sr_pair_validates_ratio_and_ids() {
        let recs = synth_set(1, 40.0, 4.0, 31);
        let high = &recs[0];
        let spec = crate::resample::ResampleSpec::auto(high.fs, high.fs / 10.0).unwrap();
        let low = crate::resample::downsample(high, &spec).unwrap();
        // Ratio 10 matches factors [5, 2] but not [2, 2].
        assert!(SrPair::new(&low, high, 10).is_ok());
        assert!(SrPair::new(&low, high, 4).is_err());
        let mut other = low.clone();
        other.id = "other".into();
        assert!(SrPair::new(&other, high, 10).is_err());
    }

    #[test]
    fn single_batch_overfit_drives_mse_down() {
        // γ = 1 on one pair: 500 steps must cut the MSE below 1% of its
        // initial value.
        let judge = frozen_tiny_judge(12);
        let recs = synth_set(1, 32.0, 4.0, 41);
        let high = &recs[0];
        let spec = crate::resample::ResampleSpec::auto(high.fs, 16.0).unwrap();
        let low = crate::resample::downsample(high, &spec).unwrap();
        let pair = SrPair::new(&low, high, 2).unwrap();
        let config = TrainConfig {
            epochs: 500,
            batch_size: 1,
            learning_rate: 1e-3,
            seed: 7,
            selection: SelectionMetric::ValJointLoss,
        };
        let outcome = train_esrnet(
            std::slice::from_ref(&pair),
            std::slice::from_ref(&pair),
            &judge,
            &tiny_esr_config(vec![2]),
            LossWeights { gamma: 1.0 },
            &config,
        )
        .unwrap();
        let initial = outcome.epoch_log[0].train_loss;
        let final_mse = {
            let y_hat = outcome.model.sr_forward(&pair.low).unwrap();
            joint_loss(&y_hat, &pair.high, &judge, LossWeights { gamma: 1.0 }).unwrap()
        };
        assert!(
            final_mse < 0.01 * initial,
            "mse {final_mse} vs initial {initial}"
        );
    }

    /// Judge sized for actual learning runs (all pools halve, so windows
    /// must be at least 32 samples).
    fn overfit_judge_config() -> JudgeConfig {
        let block = |c: usize| JudgeBlockConfig {
            conv1_channels: c,
            conv1_kernel: 3,
            conv2_channels: c,
            conv2_kernel: 3,
            pool_size: 2,
            pool_stride: 2,
        };
        JudgeConfig {
            blocks: vec![block(6), block(6), block(6), block(6), block(6)],
            gru_hidden: 8,
            attention_dim: 8,
        }
    }

    #[test]
    fn judge_overfits_separable_set() {
        // 20 separable records, validation = training set: the optimizer
        // has to reach F1 = 1.0 within 200 epochs.
        let recs = synth_set(20, 100.0, 4.0, 51);
        let refs: Vec<&EcgRecording> = recs.iter().collect();
        let config = TrainConfig {
            epochs: 200,
            batch_size: 4,
            learning_rate: 3e-3,
            seed: 9,
            selection: SelectionMetric::ValOverallF1,
        };
        let outcome = train_judge(&refs, &refs, &overfit_judge_config(), &config).unwrap();
        let best_val = outcome
            .epoch_log
            .iter()
            .map(|r| r.val_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (best_val - 1.0).abs() < 1e-12,
            "best validation F1 {best_val} after {} epochs",
            outcome.epoch_log.len()
        );
    }

    #[test]
    fn single_epoch_returns_that_epoch() {
        let recs = synth_set(12, 32.0, 4.0, 61);
        let refs: Vec<&EcgRecording> = recs.iter().collect();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let outcome = train_judge(&refs[..8], &refs[8..], &tiny_judge_config(), &config).unwrap();
        assert_eq!(outcome.best_epoch, 1);
        assert_eq!(outcome.epoch_log.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let recs = synth_set(12, 32.0, 4.0, 71);
        let refs: Vec<&EcgRecording> = recs.iter().collect();
        let config = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let a = train_judge(&refs[..8], &refs[8..], &tiny_judge_config(), &config).unwrap();
        let b = train_judge(&refs[..8], &refs[8..], &tiny_judge_config(), &config).unwrap();
        assert_eq!(a.best_epoch, b.best_epoch);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn best_selection_dominates_epoch_log_with_earliest_tie() {
        let recs = synth_set(12, 32.0, 4.0, 81);
        let refs: Vec<&EcgRecording> = recs.iter().collect();
        let config = TrainConfig {
            epochs: 6,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let outcome = train_judge(&refs[..8], &refs[8..], &tiny_judge_config(), &config).unwrap();
        let best_metric = outcome.epoch_log[outcome.best_epoch - 1].val_metric;
        for row in &outcome.epoch_log {
            assert!(best_metric >= row.val_metric);
            if row.val_metric == best_metric {
                assert!(outcome.best_epoch <= row.epoch, "tie must pick the earliest epoch");
            }
        }
    }

    #[test]
    fn empty_splits_are_rejected() {
        let recs = synth_set(4, 32.0, 4.0, 91);
        let refs: Vec<&EcgRecording> = recs.iter().collect();
        let config = TrainConfig::default();
        assert!(train_judge(&[], &refs, &tiny_judge_config(), &config).is_err());
        assert!(train_judge(&refs, &[], &tiny_judge_config(), &config).is_err());
    }

    #[test]
    fn run_cv_two_fold_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_set(10, 32.0, 4.0, 101);
        let records: BTreeMap<String, EcgRecording> =
            recs.into_iter().map(|r| (r.id.clone(), r)).collect();
        let ids: Vec<String> = records.keys().cloned().collect();
        let plan = FoldPlan::new(&ids, 2, 3).unwrap();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let judge_config = tiny_judge_config();
        let result = run_cv(
            &records,
            &plan,
            &CvRecipe::Judge { config: &judge_config },
            &config,
            &CvOptions {
                out_dir: dir.path().join("judge_run"),
                jobs: 2,
            },
        )
        .unwrap();
        assert_eq!(result.folds.len(), 2);
        assert_eq!(result.median_per_class_f1.len(), 9);
        for fold in 0..2 {
            let fold_dir = dir.path().join("judge_run").join(format!("fold_{fold}"));
            assert!(fold_dir.join("checkpoint.txt").exists());
            assert!(fold_dir.join("epochs.csv").exists());
            assert!(fold_dir.join("test_report.json").exists());
            let ckpt = crate::checkpoint::load(&fold_dir.join("checkpoint.txt")).unwrap();
            assert!(ckpt.frozen, "judge fold checkpoints are frozen for reuse");
        }
        assert!(dir.path().join("judge_run").join("summary.json").exists());
    }

    #[test]
    fn run_cv_esrnet_requires_judge_run() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_set(10, 32.0, 4.0, 111);
        let records: BTreeMap<String, EcgRecording> =
            recs.into_iter().map(|r| (r.id.clone(), r)).collect();
        let low: BTreeMap<String, EcgRecording> = records
            .iter()
            .map(|(id, r)| {
                let spec = crate::resample::ResampleSpec::auto(r.fs, 16.0).unwrap();
                (id.clone(), crate::resample::downsample(r, &spec).unwrap())
            })
            .collect();
        let ids: Vec<String> = records.keys().cloned().collect();
        let plan = FoldPlan::new(&ids, 2, 3).unwrap();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 4,
            selection: SelectionMetric::ValJointLoss,
            ..TrainConfig::default()
        };
        let judge_config = tiny_judge_config();
        let esr_config = tiny_esr_config(vec![2]);
        let missing = run_cv(
            &records,
            &plan,
            &CvRecipe::EsrNet {
                config: &esr_config,
                weights: LossWeights { gamma: 0.5 },
                judge_run: &dir.path().join("nonexistent"),
                judge_config: &judge_config,
                low: &low,
            },
            &config,
            &CvOptions {
                out_dir: dir.path().join("sr_run"),
                jobs: 1,
            },
        );
        let err = missing.unwrap_err().to_string();
        assert!(err.contains("train-judge"), "{err}");
    }
}
