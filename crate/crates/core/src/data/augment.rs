use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::fourier::{dft2, idft2};
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// Largest imaginary part tolerated after the inverse transform.
const IMAG_RESIDUAL: f64 = 1e-9;

/// Label-preserving row-wise augmentation `A(·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentationSpec {
    Identity,
    GaussianNoise { sigma: f64 },
    /// 2-D inputs only; each row rotates by an angle uniform in
    /// `[-max_degrees, max_degrees]`.
    InputRotation { max_degrees: f64 },
    /// Rows are `side×side` grids; each row mixes amplitudes with a random
    /// other row of the batch at a weight uniform in `[0, eta_max]`.
    AmplitudeMix { eta_max: f64, side: usize },
}

impl AugmentationSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            AugmentationSpec::Identity => Ok(()),
            AugmentationSpec::GaussianNoise { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            AugmentationSpec::GaussianNoise { sigma } => {
                Err(Error::Usage(format!("noise sigma must be >= 0, got {sigma}")))
            }
            AugmentationSpec::InputRotation { max_degrees } => {
                if !(0.0..=180.0).contains(&max_degrees) {
                    return Err(Error::Usage(format!(
                        "rotation range must lie in [0, 180], got {max_degrees}"
                    )));
                }
                if dim != 2 {
                    return Err(Error::Usage(format!(
                        "input rotation needs 2-D samples, got dimension {dim}"
                    )));
                }
                Ok(())
            }
            AugmentationSpec::AmplitudeMix { eta_max, side } => {
                if !(0.0..=1.0).contains(&eta_max) {
                    return Err(Error::Usage(format!("eta_max must lie in [0, 1], got {eta_max}")));
                }
                if side * side != dim {
                    return Err(Error::Usage(format!(
                        "amplitude mix side {side} does not match sample dimension {dim}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Applies `spec` to every row of `x`. Labels are never touched.
pub fn augment<R: Rng>(x: &Tensor, spec: &AugmentationSpec, rng: &mut R) -> Result<Tensor> {
    if x.dims().len() != 2 {
        return Err(Error::shape("augment", x.dims(), &[]));
    }
    let (b, d) = (x.rows(), x.cols());
    spec.validate(d)?;
    match *spec {
        AugmentationSpec::Identity => Ok(x.clone()),
        AugmentationSpec::GaussianNoise { sigma } => {
            if sigma == 0.0 {
                return Ok(x.clone());
            }
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::Usage(format!("{e}")))?;
            let data = x.data().iter().map(|v| v + noise.sample(rng)).collect();
            Tensor::new(x.dims().to_vec(), data)
        }
        AugmentationSpec::InputRotation { max_degrees } => {
            let mut data = Vec::with_capacity(b * 2);
            for r in 0..b {
                let deg = if max_degrees > 0.0 {
                    rng.random_range(-max_degrees..=max_degrees)
                } else {
                    0.0
                };
                let th = deg.to_radians();
                let (c, s) = (libm::cos(th), libm::sin(th));
                let p = x.row(r);
                data.push(c * p[0] - s * p[1]);
                data.push(s * p[0] + c * p[1]);
            }
            Tensor::new(x.dims().to_vec(), data)
        }
        AugmentationSpec::AmplitudeMix { eta_max, side } => {
            if b < 2 {
                return Err(Error::Usage(format!("amplitude mix needs a batch of at least 2, got {b}")));
            }
            let mut data = Vec::with_capacity(b * d);
            for r in 0..b {
                let mut other = rng.random_range(0..b - 1);
                if other >= r {
                    other += 1;
                }
                let eta = if eta_max > 0.0 { rng.random_range(0.0..=eta_max) } else { 0.0 };
                data.extend(mix_rows(x.row(r), x.row(other), side, eta)?);
            }
            Tensor::new(x.dims().to_vec(), data)
        }
    }
}

fn mix_rows(x1: &[f64], x2: &[f64], side: usize, eta: f64) -> Result<Vec<f64>> {
    let f1 = dft2(x1, side)?;
    let f2 = dft2(x2, side)?;
    let mixed: Vec<Complex64> = f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| {
            let amp = (1.0 - eta) * a.norm() + eta * b.norm();
            Complex64::from_polar(amp, a.arg())
        })
        .collect();
    let back = idft2(&mixed, side)?;
    let worst = back.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if worst > IMAG_RESIDUAL {
        return Err(Error::Numeric(format!(
            "inverse transform left an imaginary residual of {worst:e}"
        )));
    }
    Ok(back.into_iter().map(|v| v.re).collect())
}

fn square_side(t: &Tensor) -> Result<usize> {
    match t.dims() {
        [r, c] if r == c => Ok(*r),
        other => Err(Error::shape("amplitude_mix", other, &[])),
    }
}

/// Amplitude spectrum `(1 − η)·|F(x1)| + η·|F(x2)|` with the phase of `x1`,
/// transformed back; `η` is given.
pub fn amplitude_mix_with(x1: &Tensor, x2: &Tensor, eta: f64) -> Result<Tensor> {
    if x1.dims() != x2.dims() {
        return Err(Error::shape("amplitude_mix", x1.dims(), x2.dims()));
    }
    let side = square_side(x1)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Usage(format!("eta must lie in [0, 1], got {eta}")));
    }
    Tensor::new(x1.dims().to_vec(), mix_rows(x1.data(), x2.data(), side, eta)?)
}

/// [`amplitude_mix_with`] at a weight drawn uniformly from `[0, eta]`.
pub fn amplitude_mix<R: Rng>(x1: &Tensor, x2: &Tensor, eta: f64, rng: &mut R) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Usage(format!("eta must lie in [0, 1], got {eta}")));
    }
    let drawn = if eta > 0.0 { rng.random_range(0.0..=eta) } else { 0.0 };
    amplitude_mix_with(x1, x2, drawn)
}
