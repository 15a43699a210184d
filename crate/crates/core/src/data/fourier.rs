//! Naive separable 2-D discrete Fourier transform on square grids.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let a = sign * 2.0 * PI * k as f64 / n as f64;
            Complex64::new(libm::cos(a), libm::sin(a))
        })
        .collect()
}

/// 1-D DFT of every row, then every column, of a row-major `side×side` grid.
fn transform(input: &[Complex64], side: usize, sign: f64) -> Vec<Complex64> {
    let w = twiddles(side, sign);
    let mut rows = alloc::vec![Complex64::new(0.0, 0.0); side * side];
    for r in 0..side {
        for k in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..side {
                acc += input[r * side + c] * w[(k * c) % side];
            }
            rows[r * side + k] = acc;
        }
    }
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); side * side];
    for k in 0..side {
        for c in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..side {
                acc += rows[r * side + c] * w[(k * r) % side];
            }
            out[k * side + c] = acc;
        }
    }
    out
}

fn check_square(len: usize, side: usize) -> Result<()> {
    if side == 0 || len != side * side {
        return Err(Error::shape("dft2", &[side, side], &[len]));
    }
    Ok(())
}

pub fn dft2(x: &[f64], side: usize) -> Result<Vec<Complex64>> {
    check_square(x.len(), side)?;
    let input: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(transform(&input, side, -1.0))
}

/// Inverse of [`dft2`], including the `1/side²` normalization.
pub fn idft2(spectrum: &[Complex64], side: usize) -> Result<Vec<Complex64>> {
    check_square(spectrum.len(), side)?;
    let scale = 1.0 / (side * side) as f64;
    Ok(transform(spectrum, side, 1.0).into_iter().map(|v| v * scale).collect())
}

pub fn amplitude_spectrum(x: &[f64], side: usize) -> Result<Vec<f64>> {
    Ok(dft2(x, side)?.iter().map(|v| v.norm()).collect())
}
