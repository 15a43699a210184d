use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DomainDataset, DomainMeta};
use crate::autodiff::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Noise-free point of class `class` at arc parameter `t ∈ [0, π]`.
///
/// Two classes give interleaved half-moons centered on the origin. More
/// classes give concentric upper half-arcs of radius `1 + 0.75·k`, also
/// centered near the origin.
fn base_point(class: usize, classes: usize, t: f64) -> [f64; 2] {
    let (c, s) = (libm::cos(t), libm::sin(t));
    if classes == 2 {
        let p = if class == 0 { [c, s] } else { [1.0 - c, 0.5 - s] };
        [p[0] - 0.5, p[1] - 0.25]
    } else {
        let r = 1.0 + 0.75 * class as f64;
        [r * c, r * s - 0.5 * (1.0 + 0.375 * (classes - 1) as f64)]
    }
}

/// Rotated half-moon domains.
///
/// Every domain reuses the same latent draws (arc position and noise) from
/// `seed`, so domains differ only by their rotation angle about the origin;
/// labels are assigned round-robin and stay balanced within one sample.
pub fn gen_rotated_domains(
    n_domains: usize,
    angles_deg: &[f64],
    n_per_domain: usize,
    noise_sigma: f64,
    classes: usize,
    seed: u64,
) -> Result<Vec<DomainDataset>> {
    if angles_deg.len() != n_domains {
        return Err(Error::Usage(format!(
            "{n_domains} domains but {} angles",
            angles_deg.len()
        )));
    }
    if classes < 2 {
        return Err(Error::Usage(format!("need at least 2 classes, got {classes}")));
    }
    if n_per_domain < 10 * classes {
        return Err(Error::Usage(format!(
            "{n_per_domain} samples per domain is fewer than 10 per class for {classes} classes"
        )));
    }
    if noise_sigma.is_nan() || noise_sigma < 0.0 {
        return Err(Error::Usage(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }

    let mut rng = stream(seed, Stream::Data, 0, 0);
    let latent: Vec<(usize, [f64; 2], [f64; 2])> = (0..n_per_domain)
        .map(|i| {
            let class = i % classes;
            let t = rng.random::<f64>() * PI;
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            (class, base_point(class, classes, t), [nx * noise_sigma, ny * noise_sigma])
        })
        .collect();

    angles_deg
        .iter()
        .enumerate()
        .map(|(domain_id, &angle)| {
            let th = angle.to_radians();
            let (c, s) = (libm::cos(th), libm::sin(th));
            let mut data = Vec::with_capacity(2 * n_per_domain);
            for (_, p, n) in &latent {
                data.push(c * p[0] - s * p[1] + n[0]);
                data.push(s * p[0] + c * p[1] + n[1]);
            }
            Ok(DomainDataset {
                domain_id,
                x: Tensor::matrix(n_per_domain, 2, data)?,
                labels: latent.iter().map(|l| l.0).collect(),
                classes,
                meta: DomainMeta::RotatedMoons {
                    angle_deg: angle,
                    noise_sigma,
                    seed,
                },
            })
        })
        .collect()
}
