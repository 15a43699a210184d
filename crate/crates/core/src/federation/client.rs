use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{ClientUpdate, HyperParams};
use crate::autodiff::Tape;
use crate::data::{augment, batch_iter, AugmentationSpec, DomainDataset};
use crate::model::{forward, HeadSnapshot, ModelParams};
use crate::objective::{cross_entropy, local_loss, LossBreakdown};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Cosine-interpolated learning rate for round `t` (1-based, may be
/// fractional): `lr1 + ½(lr0 − lr1)(1 + cos(π(t − 1)/(E − 1)))`.
pub fn lr_at(t: f64, rounds: usize, lr0: f64, lr1: f64) -> f64 {
    if rounds <= 1 {
        return lr0;
    }
    let progress = (t - 1.0) / (rounds - 1) as f64;
    lr1 + 0.5 * (lr0 - lr1) * (1.0 + libm::cos(PI * progress))
}

/// SGD with heavy-ball momentum. Weight decay is applied to the parameters
/// directly rather than folded into the momentum buffer:
/// `v ← μv + g`, `θ ← θ − lr·(v + wd·θ)`.
struct Sgd {
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    fn new(len: usize, lr: f64, hp: &HyperParams) -> Self {
        Sgd {
            lr,
            momentum: hp.momentum,
            weight_decay: hp.weight_decay,
            velocity: vec![0.0; len],
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        for ((p, v), g) in theta.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= self.lr * (*v + self.weight_decay * *p);
        }
    }
}

/// Result of one client's local training in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub update: ClientUpdate,
    /// Step-averaged loss terms.
    pub losses: LossBreakdown,
    pub steps: usize,
}

enum Objective<'a> {
    Matching {
        heads: &'a [HeadSnapshot],
        aug: &'a AugmentationSpec,
    },
    CrossEntropy,
}

fn fit(
    initial: &ModelParams,
    dataset: &DomainDataset,
    hp: &HyperParams,
    round: usize,
    objective: Objective<'_>,
) -> Result<LocalOutcome> {
    hp.validate()?;
    if round == 0 {
        return Err(Error::Usage("rounds are numbered from 1".into()));
    }
    if initial.input_dim() != dataset.dim() || initial.classes() != dataset.classes {
        return Err(Error::Contract(format!(
            "model expects {} inputs and {} classes, domain {} has {} and {}",
            initial.input_dim(),
            initial.classes(),
            dataset.domain_id,
            dataset.dim(),
            dataset.classes
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Contract(format!("domain {} has no samples", dataset.domain_id)));
    }

    let arch = initial.arch().to_vec();
    let classes = initial.classes();
    let mut theta = initial.flatten();
    let lr = lr_at(round as f64, hp.rounds, hp.lr0, hp.lr1);
    let mut opt = Sgd::new(theta.len(), lr, hp);
    let mut aug_rng = stream(hp.seed, Stream::Augment, dataset.domain_id as u64, round as u64);

    let mut sums = [0.0f64; 5];
    let mut steps = 0usize;
    for e in 0..hp.local_epochs {
        let epoch = (round - 1) * hp.local_epochs + e;
        for batch in batch_iter(dataset, hp.batch, hp.seed, epoch) {
            let params = ModelParams::unflatten(&arch, classes, &theta)?;
            let mut tape = Tape::new();
            let vars = params.register(&mut tape);
            let (loss, parts) = match &objective {
                Objective::Matching { heads, aug } => {
                    let x_aug = augment(&batch.x, aug, &mut aug_rng)?;
                    local_loss(&mut tape, &vars, heads, &batch.x, &x_aug, &batch.labels, hp.matching())?
                }
                Objective::CrossEntropy => {
                    let xn = tape.constant(batch.x.clone());
                    let (_, z) = forward(&mut tape, &vars, xn)?;
                    let ce = cross_entropy(&mut tape, z, &batch.labels)?;
                    let v = tape.scalar(ce);
                    let parts = LossBreakdown {
                        ce_orig: v,
                        ce_aug: v,
                        intra: 0.0,
                        inter: 0.0,
                        total: v,
                        lambda: hp.lambda,
                    };
                    (ce, parts)
                }
            };
            if !parts.total.is_finite() {
                return Err(Error::Divergence {
                    domain_id: dataset.domain_id,
                    round,
                    step: steps,
                });
            }
            let grads = tape.backward(loss)?;
            let g = vars.flat_gradient(&grads);
            opt.step(&mut theta, &g);
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    domain_id: dataset.domain_id,
                    round,
                    step: steps,
                });
            }
            for (s, v) in sums
                .iter_mut()
                .zip([parts.ce_orig, parts.ce_aug, parts.intra, parts.inter, parts.total])
            {
                *s += v;
            }
            steps += 1;
        }
    }

    let n = steps as f64;
    Ok(LocalOutcome {
        update: ClientUpdate {
            domain_id: dataset.domain_id,
            params: ModelParams::unflatten(&arch, classes, &theta)?,
            n_samples: dataset.len(),
        },
        losses: LossBreakdown {
            ce_orig: sums[0] / n,
            ce_aug: sums[1] / n,
            intra: sums[2] / n,
            inter: sums[3] / n,
            total: sums[4] / n,
            lambda: hp.lambda,
        },
        steps,
    })
}

/// One round of local training on a source client.
///
/// Starts from `initial` with a fresh momentum buffer and runs
/// `hp.local_epochs` epochs of mini-batch SGD on the local objective. An empty
/// `heads` (round 1) drops the inter-domain term.
pub fn local_train(
    initial: &ModelParams,
    dataset: &DomainDataset,
    heads: &[HeadSnapshot],
    hp: &HyperParams,
    round: usize,
    aug: &AugmentationSpec,
) -> Result<LocalOutcome> {
    aug.validate(dataset.dim())?;
    if let Some(h) = heads.iter().find(|h| !h.matches(initial)) {
        return Err(Error::Contract(format!(
            "head snapshot of domain {} has dims {:?}, live head has {:?}",
            h.domain_id,
            h.weight.dims(),
            initial.head.weight.dims()
        )));
    }
    fit(initial, dataset, hp, round, Objective::Matching { heads, aug })
}

/// Plain cross-entropy fine-tuning (no augmentation, no matching), used for
/// the pseudo-labeled target client.
pub fn train_cross_entropy(
    initial: &ModelParams,
    dataset: &DomainDataset,
    hp: &HyperParams,
    round: usize,
) -> Result<LocalOutcome> {
    fit(initial, dataset, hp, round, Objective::CrossEntropy)
}
