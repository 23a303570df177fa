//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Per-parameter first/second moment buffers plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Completed steps; bias correction uses `t` after incrementing.
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Moment buffers shaped after `params`, defaults β1 = 0.9, β2 = 0.999,
    /// ε = 1e-8.
    pub fn new(learning_rate: f64, params: &ParamSet) -> Self {
        let m = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let v = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m,
            v,
        }
    }
}

/// One Adam update:
///
/// ```text
/// m = β1 m + (1 - β1) g        m̂ = m / (1 - β1^t)
/// v = β2 v + (1 - β2) g²       v̂ = v / (1 - β2^t)
/// p = p - lr · m̂ / (√v̂ + ε)
/// ```
pub fn adam_step(params: &mut ParamSet, grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam_step with {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, t) in params.tensors().iter().enumerate() {
        if grads[i].len() != t.len() || state.m[i].len() != t.len() {
            return Err(Error::Shape(format!(
                "adam_step buffer size mismatch on parameter {i}"
            )));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, p) in tensor.data_mut().iter_mut().enumerate() {
            let g = grads[i][j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
