//! Loss terms for one local client.
//!
//! Gradient matching only touches the classifier head. The head gradient of
//! the batch-mean cross-entropy has a closed form,
//!
//! ```text
//! ∇W = (P − Y)ᵀ H / B,   ∇b = colmean(P − Y),   P = softmax(H Wᵀ + b)
//! ```
//!
//! which [`head_grad`] records on the tape as ordinary ops, so the cosine
//! penalties built on top of it differentiate back into the feature
//! extractor and the live head.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::model::{forward, HeadSnapshot, ModelVars};
use crate::{Error, Result};

/// Added to the cosine denominator so vanishing gradients stay differentiable.
pub const COSINE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub ce_orig: f64,
    pub ce_aug: f64,
    pub intra: f64,
    pub inter: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    /// `½(ce_orig + ce_aug) + λ·intra + (1 − λ)·inter`
    pub fn recompose(&self) -> f64 {
        0.5 * (self.ce_orig + self.ce_aug) + self.lambda * self.intra + (1.0 - self.lambda) * self.inter
    }
}

/// How the gradient-matching terms enter the local loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingWeights {
    /// Balance between intra- (`λ`) and inter-domain (`1 − λ`) matching.
    pub lambda: f64,
    /// Divide the inter-domain sum by the number of snapshots.
    pub inter_normalize: bool,
    /// When false only the two cross-entropy terms are optimized.
    pub enabled: bool,
}

impl MatchingWeights {
    pub fn new(lambda: f64) -> Self {
        MatchingWeights {
            lambda,
            inter_normalize: false,
            enabled: true,
        }
    }
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::shape("labels", &[batch], &[labels.len()]));
    }
    if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return Err(Error::Usage(format!(
            "label {y} at index {i} is outside [0, {classes})"
        )));
    }
    Ok(())
}

/// Batch mean of `−log softmax(Z)[i, y_i]`.
pub fn cross_entropy(tape: &mut Tape, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
    let dims = tape.dims(logits).to_vec();
    if dims.len() != 2 {
        return Err(Error::shape("cross_entropy", &dims, &[]));
    }
    check_labels(labels, dims[0], dims[1])?;
    let onehot = tape.constant(Tensor::one_hot(labels, dims[1])?);
    let ls = tape.log_softmax_rows(logits)?;
    let picked = tape.mul(ls, onehot)?;
    let sum = tape.reduce_sum(picked)?;
    tape.scale(sum, -1.0 / dims[0] as f64)
}

/// Closed-form gradient of the batch-mean cross-entropy with respect to the
/// head `(W, b)`, returned as the flat vector `[vec(∇W), ∇b]` of length
/// `K·d_h + K`. Passing constant head nodes yields a gradient that still
/// depends differentiably on `features`.
pub fn head_grad(
    tape: &mut Tape,
    features: NodeId,
    labels: &[usize],
    head_weight: NodeId,
    head_bias: NodeId,
) -> Result<NodeId> {
    let hd = tape.dims(features).to_vec();
    let wd = tape.dims(head_weight).to_vec();
    let bd = tape.dims(head_bias).to_vec();
    if hd.len() != 2 || wd.len() != 2 || hd[1] != wd[1] {
        return Err(Error::shape("head_grad", &hd, &wd));
    }
    if bd.iter().product::<usize>() != wd[0] {
        return Err(Error::shape("head_grad", &wd, &bd));
    }
    let (batch, classes) = (hd[0], wd[0]);
    check_labels(labels, batch, classes)?;

    let wt = tape.transpose(head_weight)?;
    let z = tape.matmul(features, wt)?;
    let z = tape.add_row_broadcast(z, head_bias)?;
    let ls = tape.log_softmax_rows(z)?;
    let p = tape.exp(ls)?;
    let y = tape.constant(Tensor::one_hot(labels, classes)?);
    let residual = tape.sub(p, y)?;

    let rt = tape.transpose(residual)?;
    let gw = tape.matmul(rt, features)?;
    let gw = tape.scale(gw, 1.0 / batch as f64)?;

    let ones = tape.constant(Tensor::full(&[1, batch], 1.0 / batch as f64));
    let gb = tape.matmul(ones, residual)?;

    tape.flatten_concat(&[gw, gb])
}

/// `u·v / (‖u‖‖v‖ + ε)`
pub fn cosine_sim(tape: &mut Tape, u: NodeId, v: NodeId) -> Result<NodeId> {
    if tape.dims(u) != tape.dims(v) {
        let (a, b) = (tape.dims(u).to_vec(), tape.dims(v).to_vec());
        return Err(Error::shape("cosine_sim", &a, &b));
    }
    let num = tape.dot(u, v)?;
    let nu = tape.l2_norm(u)?;
    let nv = tape.l2_norm(v)?;
    let den = tape.mul(nu, nv)?;
    let eps = tape.constant(Tensor::scalar(COSINE_EPS));
    let den = tape.add(den, eps)?;
    tape.div(num, den)
}

fn one_minus(tape: &mut Tape, x: NodeId) -> Result<NodeId> {
    let one = tape.constant(Tensor::scalar(1.0));
    tape.sub(one, x)
}

/// `1 − sim(g, g_aug)`
pub fn intra_gm_loss(tape: &mut Tape, g: NodeId, g_aug: NodeId) -> Result<NodeId> {
    let s = cosine_sim(tape, g, g_aug)?;
    one_minus(tape, s)
}

/// `Σ_j (1 − sim(g_aug, g_j))` where `g_j` is the head gradient of the
/// original-batch features under frozen snapshot `j`.
pub fn inter_gm_loss(
    tape: &mut Tape,
    g_aug: NodeId,
    snapshots: &[HeadSnapshot],
    features: NodeId,
    labels: &[usize],
) -> Result<NodeId> {
    if snapshots.is_empty() {
        return Err(Error::Contract(
            "inter-domain matching needs at least one head snapshot".into(),
        ));
    }
    let mut terms = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        let w = tape.constant(snap.weight.clone());
        let b = tape.constant(snap.bias.clone());
        let gj = head_grad(tape, features, labels, w, b)?;
        let s = cosine_sim(tape, g_aug, gj)?;
        terms.push(one_minus(tape, s)?);
    }
    let stacked = tape.flatten_concat(&terms)?;
    tape.reduce_sum(stacked)
}

/// Full local objective on one mini-batch:
/// `½(CE(x) + CE(A(x))) + λ·L_intra + (1 − λ)·L_inter`.
///
/// With no snapshots (first round) the inter term is omitted.
pub fn local_loss(
    tape: &mut Tape,
    vars: &ModelVars,
    snapshots: &[HeadSnapshot],
    x: &Tensor,
    x_aug: &Tensor,
    labels: &[usize],
    weights: MatchingWeights,
) -> Result<(NodeId, LossBreakdown)> {
    let lambda = weights.lambda;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Usage(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if x.dims() != x_aug.dims() {
        return Err(Error::shape("local_loss", x.dims(), x_aug.dims()));
    }

    let xn = tape.constant(x.clone());
    let xa = tape.constant(x_aug.clone());
    let (h, z) = forward(tape, vars, xn)?;
    let (ha, za) = forward(tape, vars, xa)?;
    let ce_orig = cross_entropy(tape, z, labels)?;
    let ce_aug = cross_entropy(tape, za, labels)?;
    let ce_sum = tape.add(ce_orig, ce_aug)?;
    let mut total = tape.scale(ce_sum, 0.5)?;

    let mut intra_v = 0.0;
    let mut inter_v = 0.0;
    if weights.enabled {
        let g = head_grad(tape, h, labels, vars.head_weight, vars.head_bias)?;
        let g_aug = head_grad(tape, ha, labels, vars.head_weight, vars.head_bias)?;
        let intra = intra_gm_loss(tape, g, g_aug)?;
        intra_v = tape.scalar(intra);
        let wi = tape.scale(intra, lambda)?;
        total = tape.add(total, wi)?;

        if !snapshots.is_empty() {
            for s in snapshots {
                if s.weight.dims() != tape.dims(vars.head_weight) {
                    let (a, b) = (s.weight.dims().to_vec(), tape.dims(vars.head_weight).to_vec());
                    return Err(Error::shape("head_snapshot", &a, &b));
                }
            }
            let mut inter = inter_gm_loss(tape, g_aug, snapshots, h, labels)?;
            if weights.inter_normalize {
                inter = tape.scale(inter, 1.0 / snapshots.len() as f64)?;
            }
            inter_v = tape.scalar(inter);
            let we = tape.scale(inter, 1.0 - lambda)?;
            total = tape.add(total, we)?;
        }
    }

    let breakdown = LossBreakdown {
        ce_orig: tape.scalar(ce_orig),
        ce_aug: tape.scalar(ce_aug),
        intra: intra_v,
        inter: inter_v,
        total: tape.scalar(total),
        lambda,
    };
    Ok((total, breakdown))
}
