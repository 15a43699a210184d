//! Synthetic source domains and label-preserving augmentations.

mod augment;
mod fourier;
mod moons;
mod textured;

use alloc::vec::Vec;

use rand::seq::SliceRandom;

pub use augment::{amplitude_mix, amplitude_mix_with, augment, AugmentationSpec};
pub use fourier::{amplitude_spectrum, dft2, idft2};
pub use moons::gen_rotated_domains;
pub use textured::{class_mask, domain_texture, gen_textured_domains, textured_sample, MAX_TEXTURED_CLASSES};

use crate::autodiff::Tensor;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Generator parameters a domain was produced with.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainMeta {
    RotatedMoons {
        angle_deg: f64,
        noise_sigma: f64,
        seed: u64,
    },
    Textured {
        side: usize,
        frequency: (usize, usize),
        phase: f64,
        seed: u64,
    },
}

/// Labeled samples of one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub domain_id: usize,
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub meta: DomainMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub labels: Vec<usize>,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> DomainDataset {
        DomainDataset {
            domain_id: self.domain_id,
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            meta: self.meta.clone(),
        }
    }

    /// Deterministic shuffled split; the first `round(train_frac·N)` samples
    /// of the permutation form the training part.
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<(DomainDataset, DomainDataset)> {
        if !(0.0 < train_frac && train_frac < 1.0) {
            return Err(Error::Usage(alloc::format!(
                "train fraction must lie in (0, 1), got {train_frac}"
            )));
        }
        let n = self.len();
        let n_train = libm::round(train_frac * n as f64) as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Usage(alloc::format!(
                "split of {n} samples at {train_frac} leaves an empty part"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut stream(seed, Stream::Split, self.domain_id as u64, 0));
        let (tr, te) = perm.split_at(n_train);
        Ok((self.subset(tr), self.subset(te)))
    }
}

/// Index batches over a permutation keyed by `(seed, domain_id, epoch)`.
/// The last batch may be short.
pub fn batch_indices(n: usize, batch: usize, seed: u64, domain_id: usize, epoch: usize) -> Vec<Vec<usize>> {
    let batch = batch.max(1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, Stream::Batches, domain_id as u64, epoch as u64));
    perm.chunks(batch).map(|c| c.to_vec()).collect()
}

pub fn batch_iter(dataset: &DomainDataset, batch: usize, seed: u64, epoch: usize) -> Vec<Batch> {
    batch_indices(dataset.len(), batch, seed, dataset.domain_id, epoch)
        .into_iter()
        .map(|idx| Batch {
            x: dataset.x.select_rows(&idx),
            labels: idx.iter().map(|&i| dataset.labels[i]).collect(),
        })
        .collect()
}
