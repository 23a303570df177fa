//! Finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

use super::Tensor;

/// Central-difference gradients of a scalar function at `params`:
/// `(f(x + h) - f(x - h)) / 2h` per element. Errors if the function is
/// non-finite at any perturbed point.
pub fn fd_gradients<F>(mut f: F, params: &[Tensor], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut work: Vec<Tensor> = params.to_vec();
    let mut grads: Vec<Vec<f64>> = params.iter().map(|t| vec![0.0; t.len()]).collect();
    for i in 0..work.len() {
        for j in 0..work[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let f_plus = f(&work)?;
            work[i].data_mut()[j] = orig - h;
            let f_minus = f(&work)?;
            work[i].data_mut()[j] = orig;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite function value while perturbing parameter {i}[{j}]"
                )));
            }
            grads[i][j] = (f_plus - f_minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

/// Compares analytic gradients against central finite differences and
/// returns the worst relative error
/// `max_i |g_analytic,i - g_fd,i| / max(1, |g_fd,i|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], analytic: &[Vec<f64>], h: f64) -> Result<f64>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::Shape(format!(
            "grad_check with {} params but {} analytic gradient buffers",
            params.len(),
            analytic.len()
        )));
    }
    for (i, t) in params.iter().enumerate() {
        if analytic[i].len() != t.len() {
            return Err(Error::Shape(format!(
                "analytic gradient {i} has {} values, parameter has {}",
                analytic[i].len(),
                t.len()
            )));
        }
    }
    let fd = fd_gradients(f, params, h)?;
    let mut worst: f64 = 0.0;
    for (ga, gf) in analytic.iter().flatten().zip(fd.iter().flatten()) {
        let err = (ga - gf).abs() / gf.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
