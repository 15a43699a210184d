//! Randomized gradient checks.
//!
//! [`check_local_loss`] compares reverse-mode gradients of the full local
//! objective, over every model parameter, with central finite differences.
//! [`check_head_grad`] compares the closed-form head gradient with autodiff of
//! the cross-entropy. Both drive the `grad-check` command.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{finite_diff_grad, Tape, Tensor};
use crate::model::{forward, HeadSnapshot, ModelParams};
use crate::objective::{cross_entropy, head_grad, local_loss, MatchingWeights};
use crate::rng::{stream, Stream};
use crate::Result;

pub const LAMBDAS: [f64; 4] = [0.0, 0.3, 0.5, 1.0];

/// One randomly drawn evaluation point of the local objective.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: ModelParams,
    pub snapshots: Vec<HeadSnapshot>,
    pub x: Tensor,
    pub x_aug: Tensor,
    pub labels: Vec<usize>,
    pub weights: MatchingWeights,
}

fn normal_tensor(rng: &mut ChaCha8Rng, dims: &[usize], scale: f64) -> Tensor {
    let n = dims.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            scale * v
        })
        .collect();
    Tensor::new(dims.to_vec(), data).expect("dims")
}

/// Draws an instance with every width in `[1, max_arch[i]]`, `K` in
/// `[2, max_classes]`, a batch of 1 to `max_batch` rows, 1 to 3 snapshots and
/// `λ` from [`LAMBDAS`].
pub fn random_instance(max_arch: &[usize], max_classes: usize, max_batch: usize, seed: u64, trial: u64) -> Result<Instance> {
    let mut rng = stream(seed, Stream::Instance, trial, 0);
    let arch: Vec<usize> = max_arch.iter().map(|&m| rng.random_range(1..=m.max(1))).collect();
    let classes = rng.random_range(2..=max_classes.max(2));
    let batch = rng.random_range(1..=max_batch.max(1));
    let n_snap = rng.random_range(1..=3);
    let lambda = LAMBDAS[rng.random_range(0..LAMBDAS.len())];

    let mut params = ModelParams::init(&arch, classes, rng.random())?;
    for l in params.layers.iter_mut().chain(core::iter::once(&mut params.head)) {
        l.bias = normal_tensor(&mut rng, l.bias.dims(), 0.1);
    }
    let d_h = params.feature_dim();
    let snapshots = (0..n_snap)
        .map(|j| HeadSnapshot {
            domain_id: j,
            round: 0,
            weight: normal_tensor(&mut rng, &[classes, d_h], 0.7),
            bias: normal_tensor(&mut rng, &[classes], 0.2),
        })
        .collect();
    let x = normal_tensor(&mut rng, &[batch, arch[0]], 1.0);
    let noise = normal_tensor(&mut rng, &[batch, arch[0]], 0.3);
    let x_aug = Tensor::new(
        x.dims().to_vec(),
        x.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect(),
    )?;
    let labels = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    Ok(Instance {
        params,
        snapshots,
        x,
        x_aug,
        labels,
        weights: MatchingWeights::new(lambda),
    })
}

impl Instance {
    /// Local objective evaluated at flat parameters `theta`.
    pub fn loss_at(&self, theta: &[f64]) -> Result<f64> {
        let p = ModelParams::unflatten(self.params.arch(), self.params.classes(), theta)?;
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let (loss, _) = local_loss(&mut tape, &vars, &self.snapshots, &self.x, &self.x_aug, &self.labels, self.weights)?;
        Ok(tape.scalar(loss))
    }

    /// Reverse-mode gradient of the local objective in flattening order.
    pub fn autodiff_gradient(&self) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let (loss, _) = local_loss(&mut tape, &vars, &self.snapshots, &self.x, &self.x_aug, &self.labels, self.weights)?;
        Ok(vars.flat_gradient(&tape.backward(loss)?))
    }
}

/// Worst disagreement found by a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Discrepancy {
    /// Largest relative error among coordinates with `|g| > magnitude_floor`.
    pub worst_relative: f64,
    /// Largest absolute error among the remaining coordinates.
    pub worst_absolute: f64,
    /// First coordinate outside tolerance: `(coordinate, autodiff, reference)`.
    pub violation: Option<(usize, f64, f64)>,
}

/// Tolerances for [`compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    /// Coordinates with `|g|` above this are judged relatively.
    pub magnitude_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            relative: 1e-5,
            absolute: 1e-7,
            magnitude_floor: 1e-6,
        }
    }
}

pub fn compare(autodiff: &[f64], reference: &[f64], tol: Tolerance) -> Discrepancy {
    let mut d = Discrepancy::default();
    for (k, (&a, &r)) in autodiff.iter().zip(reference).enumerate() {
        let err = (a - r).abs();
        let ok = if a.abs() > tol.magnitude_floor {
            let rel = err / a.abs();
            d.worst_relative = d.worst_relative.max(rel);
            rel <= tol.relative
        } else {
            d.worst_absolute = d.worst_absolute.max(err);
            err <= tol.absolute
        };
        if !ok && d.violation.is_none() {
            d.violation = Some((k, a, r));
        }
    }
    d
}

/// Autodiff versus central differences (step `h`) on the full objective.
pub fn check_local_loss(inst: &Instance, h: f64, tol: Tolerance) -> Result<Discrepancy> {
    let g = inst.autodiff_gradient()?;
    let theta = inst.params.flatten();
    let mut failure = None;
    let fd = finite_diff_grad(
        |t| match inst.loss_at(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &theta,
        h,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(compare(&g, &fd?, tol))
}

/// Largest absolute difference between [`head_grad`] and autodiff of the
/// cross-entropy with respect to `(W, b)`, on the instance's original batch.
pub fn check_head_grad(inst: &Instance) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = inst.params.register(&mut tape);
    let xn = tape.constant(inst.x.clone());
    let (h, z) = forward(&mut tape, &vars, xn)?;
    let ce = cross_entropy(&mut tape, z, &inst.labels)?;
    let grads = tape.backward(ce)?;
    let mut reference = grads.get(vars.head_weight).unwrap().data().to_vec();
    reference.extend_from_slice(grads.get(vars.head_bias).unwrap().data());

    let closed = head_grad(&mut tape, h, &inst.labels, vars.head_weight, vars.head_bias)?;
    Ok(tape
        .value(closed)
        .data()
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
