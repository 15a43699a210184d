use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DomainDataset, DomainMeta};
use crate::autodiff::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

pub const MAX_TEXTURED_CLASSES: usize = 6;

const TEXTURE_FREQUENCIES: [(usize, usize); 8] = [(1, 0), (0, 2), (2, 1), (3, 3), (1, 3), (3, 0), (2, 3), (0, 1)];

/// Binary content mask of `class` on a `side×side` grid, shifted by
/// `(dr, dc)` pixels. Shapes are coarse so they live in low frequencies.
pub fn class_mask(class: usize, side: usize, dr: isize, dc: isize) -> Vec<f64> {
    let s = side as f64;
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            // pixel-center coordinates in [-0.5, 0.5], after shifting
            let y = ((r as isize - dr) as f64 + 0.5) / s - 0.5;
            let x = ((c as isize - dc) as f64 + 0.5) / s - 0.5;
            let on = match class {
                0 => x * x + y * y <= 0.3 * 0.3,
                1 => x.abs() <= 0.12 || y.abs() <= 0.12,
                2 => {
                    let m = x.abs().max(y.abs());
                    (0.25..=0.42).contains(&m)
                }
                3 => y.abs() <= 0.15 && x.abs() <= 0.42,
                4 => x.abs() <= 0.15 && y.abs() <= 0.42,
                _ => (x - y).abs() <= 0.15,
            };
            out.push(if on { 1.0 } else { 0.0 });
        }
    }
    out
}

/// `(frequency, phase, amplitude)` of the additive style texture of a domain.
pub fn domain_texture(domain_id: usize) -> ((usize, usize), f64, f64) {
    let freq = TEXTURE_FREQUENCIES[domain_id % TEXTURE_FREQUENCIES.len()];
    let phase = domain_id as f64 * PI / 3.0;
    let amplitude = 0.4 + 0.15 * (domain_id % 3) as f64;
    (freq, phase, amplitude)
}

/// One grid of class `class` in domain `domain_id`. The content jitters by up
/// to one pixel and in contrast; the domain adds its sinusoid. The draw is
/// keyed by `(seed, domain_id, index)`.
pub fn textured_sample(side: usize, class: usize, domain_id: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = stream(seed, Stream::Data, domain_id as u64, index as u64);
    let dr = rng.random_range(-1..=1i32) as isize;
    let dc = rng.random_range(-1..=1i32) as isize;
    let contrast = rng.random_range(0.8..1.2);
    let jitter = rng.random_range(-0.3..0.3);
    let ((fx, fy), phase, amp) = domain_texture(domain_id);
    let mask = class_mask(class, side, dr, dc);
    let s = side as f64;
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let arg = 2.0 * PI * (fx as f64 * c as f64 + fy as f64 * r as f64) / s + phase + jitter;
            let noise: f64 = StandardNormal.sample(&mut rng);
            out.push(contrast * mask[r * side + c] + amp * libm::sin(arg) + 0.05 * noise);
        }
    }
    out
}

/// Image-like domains where content depends on the class and style on the
/// domain.
pub fn gen_textured_domains(
    n_domains: usize,
    side: usize,
    n_per_domain: usize,
    classes: usize,
    seed: u64,
) -> Result<Vec<DomainDataset>> {
    if !(8..=32).contains(&side) {
        return Err(Error::Usage(format!("side must lie in [8, 32], got {side}")));
    }
    if !(2..=MAX_TEXTURED_CLASSES).contains(&classes) {
        return Err(Error::Usage(format!(
            "textured domains support 2..={MAX_TEXTURED_CLASSES} classes, got {classes}"
        )));
    }
    if n_per_domain < 10 * classes {
        return Err(Error::Usage(format!(
            "{n_per_domain} samples per domain is fewer than 10 per class for {classes} classes"
        )));
    }
    (0..n_domains)
        .map(|domain_id| {
            let labels: Vec<usize> = (0..n_per_domain).map(|i| i % classes).collect();
            let mut data = Vec::with_capacity(n_per_domain * side * side);
            for (i, &y) in labels.iter().enumerate() {
                data.extend(textured_sample(side, y, domain_id, seed, i));
            }
            let (frequency, phase, _) = domain_texture(domain_id);
            Ok(DomainDataset {
                domain_id,
                x: Tensor::matrix(n_per_domain, side * side, data)?,
                labels,
                classes,
                meta: DomainMeta::Textured {
                    side,
                    frequency,
                    phase,
                    seed,
                },
            })
        })
        .collect()
}
