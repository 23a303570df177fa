//! Experiment configuration: a flat key=value text file.
//!
//! Every key has a default; unknown keys are rejected. `#` starts a comment.
//! The resolved configuration (defaults filled in) is echoed into each
//! command's output directory for provenance.

use std::path::{Path, PathBuf};

use crate::data::{LeadId, WindowPolicy};
use crate::error::{Error, Result};
use crate::esrnet::{Activation, EsrNetConfig};
use crate::judge::{JudgeBlockConfig, JudgeConfig};
use crate::train::{GammaPreset, SelectionMetric, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    /// Master seed for synthesis and training; `--seed` / `ESR_SEED`
    /// override it.
    pub seed: u64,
    /// Existing manifest to ingest; empty means the synthetic dataset under
    /// `dataset.dir`.
    pub dataset_manifest: Option<PathBuf>,
    pub dataset_dir: PathBuf,
    pub dataset_lead: LeadId,
    pub synth_records: usize,
    pub synth_fs: f64,
    pub synth_duration_s: f64,
    pub synth_heart_rate_lo: f64,
    pub synth_heart_rate_hi: f64,
    pub synth_noise_mv: f64,
    pub window_seconds: f64,
    pub window_policy: WindowPolicy,
    pub folds_n: usize,
    pub folds_seed: u64,
    /// Downsampling grid for `prepare` and `sweep`, in Hz.
    pub fs_grid: Vec<f64>,
    pub sr_source_fs: f64,
    pub sr_target_fs: f64,
    pub esrnet: EsrNetConfig,
    pub judge: JudgeConfig,
    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_lr: f64,
    pub selection_judge: SelectionMetric,
    pub selection_sr: SelectionMetric,
    pub gamma_presets: Vec<GammaPreset>,
    /// Record ids for waveform CSVs; empty means the first test record of
    /// fold 0.
    pub report_records: Vec<String>,
    pub ppr_eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: 42,
            dataset_manifest: None,
            dataset_dir: PathBuf::from("out/dataset"),
            dataset_lead: LeadId::II,
            synth_records: 90,
            synth_fs: 100.0,
            synth_duration_s: 10.0,
            synth_heart_rate_lo: 55.0,
            synth_heart_rate_hi: 75.0,
            synth_noise_mv: 0.02,
            window_seconds: 10.0,
            window_policy: WindowPolicy::PadZeroTail,
            folds_n: 10,
            folds_seed: 7,
            fs_grid: vec![50.0, 25.0, 10.0, 5.0],
            sr_source_fs: 10.0,
            sr_target_fs: 100.0,
            esrnet: EsrNetConfig::default(),
            judge: JudgeConfig::default(),
            train_epochs: 100,
            train_batch_size: 16,
            train_lr: 1e-3,
            selection_judge: SelectionMetric::ValOverallF1,
            selection_sr: SelectionMetric::ValJointLoss,
            gamma_presets: vec![GammaPreset::Lc, GammaPreset::Lr, GammaPreset::Lj],
            report_records: Vec::new(),
            ppr_eps: 1e-9,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for key {key:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for key {key:?}, expected true/false"))),
    }
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|part| f(part.trim())).collect::<Result<Vec<T>>>().map_err(|e| {
        Error::Config(format!("key {key:?}: {e}"))
    })
}

fn parse_judge_blocks(value: &str) -> Result<Vec<JudgeBlockConfig>> {
    value
        .split(',')
        .map(|block| {
            let nums: Vec<usize> = block
                .trim()
                .split(':')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("bad judge block field {s:?}")))
                })
                .collect::<Result<Vec<usize>>>()?;
            if nums.len() != 6 {
                return Err(Error::Config(format!(
                    "judge block {block:?} needs 6 colon-separated fields \
                     (c1:k1:c2:k2:pool_size:pool_stride)"
                )));
            }
            Ok(JudgeBlockConfig {
                conv1_channels: nums[0],
                conv1_kernel: nums[1],
                conv2_channels: nums[2],
                conv2_kernel: nums[3],
                pool_size: nums[4],
                pool_stride: nums[5],
            })
        })
        .collect()
}

fn judge_blocks_text(blocks: &[JudgeBlockConfig]) -> String {
    blocks
        .iter()
        .map(|b| {
            format!(
                "{}:{}:{}:{}:{}:{}",
                b.conv1_channels, b.conv1_kernel, b.conv2_channels, b.conv2_kernel, b.pool_size,
                b.pool_stride
            )
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn join_nums<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "dataset.manifest" => {
                self.dataset_manifest =
                    if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "dataset.dir" => self.dataset_dir = PathBuf::from(value),
            "dataset.lead" => self.dataset_lead = value.parse()?,
            "synth.records" => self.synth_records = parse_num(key, value)?,
            "synth.fs" => self.synth_fs = parse_num(key, value)?,
            "synth.duration_s" => self.synth_duration_s = parse_num(key, value)?,
            "synth.heart_rate_lo" => self.synth_heart_rate_lo = parse_num(key, value)?,
            "synth.heart_rate_hi" => self.synth_heart_rate_hi = parse_num(key, value)?,
            "synth.noise_mv" => self.synth_noise_mv = parse_num(key, value)?,
            "window.seconds" => self.window_seconds = parse_num(key, value)?,
            "window.policy" => self.window_policy = value.parse()?,
            "folds.n" => self.folds_n = parse_num(key, value)?,
            "folds.seed" => self.folds_seed = parse_num(key, value)?,
            "fs.grid" => self.fs_grid = parse_list(key, value, |s| parse_num(key, s))?,
            "sr.source_fs" => self.sr_source_fs = parse_num(key, value)?,
            "sr.target_fs" => self.sr_target_fs = parse_num(key, value)?,
            "esrnet.base_channels" => self.esrnet.base_channels = parse_num(key, value)?,
            "esrnet.res_blocks" => self.esrnet.n_res_blocks = parse_num(key, value)?,
            "esrnet.head_kernel" => self.esrnet.head_kernel = parse_num(key, value)?,
            "esrnet.block_kernel" => self.esrnet.block_kernel = parse_num(key, value)?,
            "esrnet.upsample_factors" => {
                self.esrnet.upsample_factors = parse_list(key, value, |s| parse_num(key, s))?
            }
            "esrnet.activation" => self.esrnet.activation = value.parse()?,
            "esrnet.global_skip" => self.esrnet.global_skip = parse_bool(key, value)?,
            "esrnet.channel_norm" => self.esrnet.channel_norm = parse_bool(key, value)?,
            "judge.blocks" => self.judge.blocks = parse_judge_blocks(value)?,
            "judge.gru_hidden" => self.judge.gru_hidden = parse_num(key, value)?,
            "judge.attention_dim" => self.judge.attention_dim = parse_num(key, value)?,
            "train.epochs" => self.train_epochs = parse_num(key, value)?,
            "train.batch_size" => self.train_batch_size = parse_num(key, value)?,
            "train.lr" => self.train_lr = parse_num(key, value)?,
            "train.selection.judge" => self.selection_judge = value.parse()?,
            "train.selection.sr" => self.selection_sr = value.parse()?,
            "gamma.presets" => {
                self.gamma_presets = parse_list(key, value, |s| s.parse::<GammaPreset>())?
            }
            "report.records" => {
                self.report_records = parse_list(key, value, |s| Ok(s.to_string()))?
            }
            "ppr.eps" => self.ppr_eps = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.esrnet.validate()?;
        self.judge.validate()?;
        if self.folds_n < 2 {
            return Err(Error::Config("folds.n must be at least 2".into()));
        }
        if !(self.window_seconds > 0.0) {
            return Err(Error::Config("window.seconds must be positive".into()));
        }
        if !(self.sr_source_fs > 0.0) || !(self.sr_target_fs > self.sr_source_fs) {
            return Err(Error::Config(format!(
                "sr rates must satisfy 0 < source < target, got {} -> {}",
                self.sr_source_fs, self.sr_target_fs
            )));
        }
        for &fs in &self.fs_grid {
            if !(fs > 0.0) {
                return Err(Error::Config(format!("fs.grid entry {fs} must be positive")));
            }
        }
        if self.synth_heart_rate_lo > self.synth_heart_rate_hi {
            return Err(Error::Config("synth heart-rate range is inverted".into()));
        }
        if !(self.ppr_eps > 0.0) {
            return Err(Error::Config("ppr.eps must be positive".into()));
        }
        Ok(())
    }

    /// The resolved configuration as canonical key=value text; parsing it
    /// back yields an equal configuration.
    pub fn to_text(&self) -> String {
        let policy = match self.window_policy {
            WindowPolicy::CropCenter => "crop_center",
            WindowPolicy::PadZeroTail => "pad_zero_tail",
        };
        let activation = match self.esrnet.activation {
            Activation::PRelu => "prelu",
            Activation::Relu => "relu",
        };
        let selection = |s: SelectionMetric| match s {
            SelectionMetric::ValOverallF1 => "val_overall_f1",
            SelectionMetric::ValJointLoss => "val_joint_loss",
        };
        let presets: Vec<&str> = self.gamma_presets.iter().map(|p| p.token()).collect();
        format!(
            "out_dir={}\n\
             seed={}\n\
             dataset.manifest={}\n\
             dataset.dir={}\n\
             dataset.lead={}\n\
             synth.records={}\n\
             synth.fs={}\n\
             synth.duration_s={}\n\
             synth.heart_rate_lo={}\n\
             synth.heart_rate_hi={}\n\
             synth.noise_mv={}\n\
             window.seconds={}\n\
             window.policy={policy}\n\
             folds.n={}\n\
             folds.seed={}\n\
             fs.grid={}\n\
             sr.source_fs={}\n\
             sr.target_fs={}\n\
             esrnet.base_channels={}\n\
             esrnet.res_blocks={}\n\
             esrnet.head_kernel={}\n\
             esrnet.block_kernel={}\n\
             esrnet.upsample_factors={}\n\
             esrnet.activation={activation}\n\
             esrnet.global_skip={}\n\
             esrnet.channel_norm={}\n\
             judge.blocks={}\n\
             judge.gru_hidden={}\n\
             judge.attention_dim={}\n\
             train.epochs={}\n\
             train.batch_size={}\n\
             train.lr={}\n\
             train.selection.judge={}\n\
             train.selection.sr={}\n\
             gamma.presets={}\n\
             report.records={}\n\
             ppr.eps={}\n",
            self.out_dir.display(),
            self.seed,
            self.dataset_manifest.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.dataset_dir.display(),
            self.dataset_lead,
            self.synth_records,
            self.synth_fs,
            self.synth_duration_s,
            self.synth_heart_rate_lo,
            self.synth_heart_rate_hi,
            self.synth_noise_mv,
            self.window_seconds,
            self.folds_n,
            self.folds_seed,
            join_nums(&self.fs_grid),
            self.sr_source_fs,
            self.sr_target_fs,
            self.esrnet.base_channels,
            self.esrnet.n_res_blocks,
            self.esrnet.head_kernel,
            self.esrnet.block_kernel,
            join_nums(&self.esrnet.upsample_factors),
            self.esrnet.global_skip,
            self.esrnet.channel_norm,
            judge_blocks_text(&self.judge.blocks),
            self.judge.gru_hidden,
            self.judge.attention_dim,
            self.train_epochs,
            self.train_batch_size,
            self.train_lr,
            selection(self.selection_judge),
            selection(self.selection_sr),
            presets.join(","),
            self.report_records.join(","),
            self.ppr_eps,
        )
    }

    /// Writes the resolved configuration into `dir` for provenance.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config_echo.txt"), self.to_text())?;
        Ok(())
    }

    /// Training configuration for the judge phase.
    pub fn judge_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            learning_rate: self.train_lr,
            seed: self.seed,
            selection: self.selection_judge,
        }
    }

    /// Training configuration for the generator phase.
    pub fn sr_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            learning_rate: self.train_lr,
            seed: self.seed,
            selection: self.selection_sr,
        }
    }

    /// The manifest all experiments start from: an ingested one when
    /// configured, otherwise the synthetic dataset's manifest.
    pub fn base_manifest_path(&self) -> PathBuf {
        self.dataset_manifest
            .clone()
            .unwrap_or_else(|| self.dataset_dir.join("manifest.csv"))
    }
}
