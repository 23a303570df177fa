//! Sampling-rate conversion: decimation, linear-interpolation downsampling,
//! and the non-learned linear upsampling baseline.
//!
//! Decimation keeps samples at indices `0, k, 2k, …` where
//! `k = source_fs / target_fs` must be a whole number. Non-divisor targets
//! use the piecewise-linear interpolant of the source evaluated on the
//! uniform target grid. Beyond the final source point the last sample value
//! is held.

use crate::data::EcgRecording;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleMode {
    Decimate,
    LinearInterp,
}

/// A validated source→target rate conversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResampleSpec {
    pub source_fs: f64,
    pub target_fs: f64,
    pub mode: ResampleMode,
    /// Apply a moving-average low-pass of width `k` before decimation.
    /// Ignored in linear-interpolation mode.
    pub anti_alias: bool,
}

impl ResampleSpec {
    pub fn new(source_fs: f64, target_fs: f64, mode: ResampleMode, anti_alias: bool) -> Result<Self> {
        let spec = Self {
            source_fs,
            target_fs,
            mode,
            anti_alias,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Decimation when the ratio is integral, linear interpolation otherwise.
    pub fn auto(source_fs: f64, target_fs: f64) -> Result<Self> {
        let mode = if integral_ratio(source_fs, target_fs).is_some() {
            ResampleMode::Decimate
        } else {
            ResampleMode::LinearInterp
        };
        Self::new(source_fs, target_fs, mode, false)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_fs > 0.0) || !(self.target_fs > 0.0) {
            return Err(Error::Invalid(format!(
                "sampling rates must be positive, got {} -> {}",
                self.source_fs, self.target_fs
            )));
        }
        if self.target_fs > self.source_fs {
            return Err(Error::Invalid(format!(
                "downsampling requires target_fs <= source_fs, got {} -> {}",
                self.source_fs, self.target_fs
            )));
        }
        if self.mode == ResampleMode::Decimate && integral_ratio(self.source_fs, self.target_fs).is_none()
        {
            return Err(Error::Invalid(format!(
                "decimate requires an integer rate ratio, got {} / {}",
                self.source_fs, self.target_fs
            )));
        }
        Ok(())
    }

    fn factor(&self) -> usize {
        integral_ratio(self.source_fs, self.target_fs).expect("validated spec")
    }
}

fn integral_ratio(source_fs: f64, target_fs: f64) -> Option<usize> {
    let ratio = source_fs / target_fs;
    let k = ratio.round();
    if k >= 1.0 && (ratio - k).abs() < 1e-9 {
        Some(k as usize)
    } else {
        None
    }
}

/// Produces the low-sampling-frequency version of a recording.
pub fn downsample(rec: &EcgRecording, spec: &ResampleSpec) -> Result<EcgRecording> {
    spec.validate()?;
    if (rec.fs - spec.source_fs).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "recording {:?} is at {} Hz, spec expects {} Hz",
            rec.id, rec.fs, spec.source_fs
        )));
    }
    let samples = match spec.mode {
        ResampleMode::Decimate => {
            let k = spec.factor();
            let src: Vec<f64> = if spec.anti_alias && k > 1 {
                moving_average(&rec.samples, k)
            } else {
                rec.samples.clone()
            };
            src.iter().copied().step_by(k).collect()
        }
        ResampleMode::LinearInterp => {
            let n_out = out_len(rec.samples.len(), rec.fs, spec.target_fs);
            let step = spec.source_fs / spec.target_fs;
            (0..n_out)
                .map(|m| interp_at(&rec.samples, m as f64 * step))
                .collect()
        }
    };
    EcgRecording::new(rec.id.clone(), rec.lead, spec.target_fs, samples, rec.label)
}

/// Piecewise-linear upsampling onto a denser uniform grid; the non-learned
/// baseline to compare model reconstructions against.
pub fn upsample_linear(rec: &EcgRecording, target_fs: f64) -> Result<EcgRecording> {
    if !(target_fs > 0.0) {
        return Err(Error::Invalid(format!("target_fs must be positive, got {target_fs}")));
    }
    if target_fs < rec.fs {
        return Err(Error::Invalid(format!(
            "upsample requires target_fs >= source fs, got {} -> {target_fs}",
            rec.fs
        )));
    }
    let n_out = out_len(rec.samples.len(), rec.fs, target_fs);
    let step = rec.fs / target_fs;
    let samples = (0..n_out)
        .map(|m| interp_at(&rec.samples, m as f64 * step))
        .collect();
    EcgRecording::new(rec.id.clone(), rec.lead, target_fs, samples, rec.label)
}

/// Output length preserving duration: `round(len / source_fs * target_fs)`.
fn out_len(len: usize, source_fs: f64, target_fs: f64) -> usize {
    ((len as f64 / source_fs) * target_fs).round() as usize
}

/// Linear interpolation at fractional source index `pos`; exact at integer
/// positions, last value held past the end.
fn interp_at(samples: &[f64], pos: f64) -> f64 {
    let i = pos.floor() as usize;
    if i + 1 >= samples.len() {
        return samples[samples.len() - 1];
    }
    let t = pos - i as f64;
    if t == 0.0 {
        return samples[i];
    }
    samples[i] + (samples[i + 1] - samples[i]) * t
}

/// Causal block mean: output `i` averages `samples[i..i+width]`, truncated
/// at the tail.
fn moving_average(samples: &[f64], width: usize) -> Vec<f64> {
    (0..samples.len())
        .map(|i| {
            let end = (i + width).min(samples.len());
            let w = &samples[i..end];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CaLabel, LeadId};
    use crate::rng::Lcg64;

    fn rec(fs: f64, samples: Vec<f64>) -> EcgRecording {
        EcgRecording::new("r", LeadId::II, fs, samples, CaLabel::Normal).unwrap()
    }

    #[test]
    fn decimate_keeps_every_kth_sample() {
        let r = rec(500.0, vec![0.0, 1.0, 2.0, 3.0]);
        let spec = ResampleSpec::new(500.0, 250.0, ResampleMode::Decimate, false).unwrap();
        let d = downsample(&r, &spec).unwrap();
        assert_eq!(d.samples, vec![0.0, 2.0]);
        assert_eq!(d.fs, 250.0);
    }

    #[test]
    fn decimate_factor_twenty_length() {
        let r = rec(500.0, (0..5000).map(|i| i as f64).collect());
        let spec = ResampleSpec::new(500.0, 25.0, ResampleMode::Decimate, false).unwrap();
        let d = downsample(&r, &spec).unwrap();
        assert_eq!(d.samples.len(), 250);
    }

    #[test]
    fn non_integer_ratio_needs_linear_interp() {
        // 500 / 15 is not an integer: decimate rejects, linear succeeds.
        assert!(ResampleSpec::new(500.0, 15.0, ResampleMode::Decimate, false).is_err());
        let r = rec(500.0, (0..5000).map(|i| (i as f64 * 0.01).sin()).collect());
        let spec = ResampleSpec::new(500.0, 15.0, ResampleMode::LinearInterp, false).unwrap();
        let d = downsample(&r, &spec).unwrap();
        assert_eq!(d.samples.len(), 150);
        assert_eq!(ResampleSpec::auto(500.0, 15.0).unwrap().mode, ResampleMode::LinearInterp);
        assert_eq!(ResampleSpec::auto(500.0, 25.0).unwrap().mode, ResampleMode::Decimate);
    }

    #[test]
    fn upsample_rejected_by_downsample_spec() {
        assert!(ResampleSpec::new(500.0, 600.0, ResampleMode::LinearInterp, false).is_err());
    }

    #[test]
    fn upsample_linear_hand_case() {
        // [0, 2] at 250 Hz -> 500 Hz: [0, 1, 2, 2] under tail-hold.
        let r = rec(250.0, vec![0.0, 2.0]);
        let u = upsample_linear(&r, 500.0).unwrap();
        assert_eq!(u.samples, vec![0.0, 1.0, 2.0, 2.0]);
        assert_eq!(u.fs, 500.0);
    }

    #[test]
    fn upsample_at_same_rate_is_identity() {
        let r = rec(250.0, vec![0.5, -0.25, 1.5]);
        let u = upsample_linear(&r, 250.0).unwrap();
        assert_eq!(u.samples, r.samples);
        assert!(upsample_linear(&r, 100.0).is_err());
    }

    #[test]
    fn constant_signal_stays_constant() {
        let r = rec(100.0, vec![0.7; 50]);
        let u = upsample_linear(&r, 350.0).unwrap();
        assert!(u.samples.iter().all(|&v| v == 0.7));
        assert_eq!(u.samples.len(), 175);
    }

    #[test]
    fn decimate_matches_source_at_kept_indices() {
        let mut rng = Lcg64::new(11);
        for factor in [2usize, 4, 10] {
            let n = 40 * factor + 3;
            let r = rec(400.0, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect());
            let spec =
                ResampleSpec::new(400.0, 400.0 / factor as f64, ResampleMode::Decimate, false)
                    .unwrap();
            let d = downsample(&r, &spec).unwrap();
            for (i, v) in d.samples.iter().enumerate() {
                assert_eq!(*v, r.samples[i * factor]);
            }
        }
    }

    #[test]
    fn down_then_up_is_exact_at_kept_indices() {
        let mut rng = Lcg64::new(13);
        let r = rec(200.0, (0..600).map(|_| rng.uniform(-2.0, 2.0)).collect());
        let spec = ResampleSpec::new(200.0, 50.0, ResampleMode::Decimate, false).unwrap();
        let d = downsample(&r, &spec).unwrap();
        let u = upsample_linear(&d, 200.0).unwrap();
        for i in 0..d.samples.len() {
            assert_eq!(u.samples[i * 4], r.samples[i * 4]);
        }
    }

    #[test]
    fn linear_interp_is_exact_on_affine_signals() {
        let fs = 480.0;
        let affine = |t: f64| 0.75 * t - 0.3;
        let r = rec(fs, (0..960).map(|i| affine(i as f64 / fs)).collect());
        for target in [160.0, 120.0, 96.0] {
            let spec = ResampleSpec::new(fs, target, ResampleMode::LinearInterp, false).unwrap();
            let d = downsample(&r, &spec).unwrap();
            // Last output point may fall past the final source sample (held).
            for (m, v) in d.samples.iter().enumerate().take(d.samples.len() - 1) {
                let expect = affine(m as f64 / target);
                assert!((v - expect).abs() < 1e-12, "m={m} v={v} expect={expect}");
            }
        }
    }

    #[test]
    fn anti_alias_averages_blocks() {
        let r = rec(100.0, vec![0.0, 2.0, 4.0, 6.0]);
        let spec = ResampleSpec::new(100.0, 50.0, ResampleMode::Decimate, true).unwrap();
        let d = downsample(&r, &spec).unwrap();
        // Width-2 means at indices 0 and 2: (0+2)/2, (4+6)/2.
        assert_eq!(d.samples, vec![1.0, 5.0]);
    }

    #[test]
    fn downsample_checks_recording_rate() {
        let r = rec(100.0, vec![1.0, 2.0]);
        let spec = ResampleSpec::new(500.0, 250.0, ResampleMode::Decimate, false).unwrap();
        assert!(downsample(&r, &spec).is_err());
    }
}
