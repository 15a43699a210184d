use alloc::vec::Vec;

use crate::{Error, Result};

/// Central finite differences `(f(θ + h·e_k) − f(θ − h·e_k)) / 2h` for every
/// coordinate `k`. Used as an independent check on [`super::Tape::backward`].
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Usage(alloc::format!("step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&probe);
        probe[k] = orig - h;
        let minus = f(&probe);
        probe[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Oracle { coordinate: k });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
