//! ECG signal super-resolution at desk scale.
//!
//! The crate covers the full pipeline: dataset handling and synthetic ECG
//! generation, rate conversion, a reverse-mode differentiable compute core,
//! the ESRNet reconstruction network and the frozen arrhythmia judge, the
//! γ-weighted joint training loss with 10-fold cross-validation, and the
//! F1 / PPR / statistics evaluation stack. The `esr` binary exposes the
//! experiment commands; see the crate README for the workflow.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod esrnet;
pub mod judge;
pub mod metrics;
pub mod params;
pub mod resample;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
