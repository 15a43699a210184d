use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Tensor;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Target samples that passed the knowledge vote.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoLabeledSet {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
}

impl PseudoLabeledSet {
    pub fn n_accepted(&self) -> usize {
        self.indices.len()
    }

    /// Fraction of accepted labels that agree with `truth` (indexed like the
    /// voted pool). `None` when nothing was accepted.
    pub fn precision(&self, truth: &[usize]) -> Option<f64> {
        if self.indices.is_empty() {
            return None;
        }
        let hits = self
            .indices
            .iter()
            .zip(&self.labels)
            .filter(|(&i, &y)| truth[i] == y)
            .count();
        Some(hits as f64 / self.indices.len() as f64)
    }
}

fn softmax_row(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Confidence-thresholded consensus labelling.
///
/// A model votes for its argmax class on a sample when its top softmax
/// probability reaches `tau`. A sample is accepted when one class collects at
/// least `min_votes` votes and strictly more than every other class; its
/// confidence is the mean top probability of the models voting for the
/// winner.
pub fn knowledge_vote(models: &[ModelParams], x: &Tensor, tau: f64, min_votes: usize) -> Result<PseudoLabeledSet> {
    if models.is_empty() {
        return Err(Error::Usage("knowledge vote needs at least one source model".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Usage(format!("tau must lie in (0, 1], got {tau}")));
    }
    let classes = models[0].classes();
    if models.iter().any(|m| m.classes() != classes) {
        return Err(Error::Contract("source models disagree on the class count".into()));
    }
    let logits = models.iter().map(|m| m.logits(x)).collect::<Result<Vec<_>>>()?;

    let mut out = PseudoLabeledSet::default();
    for i in 0..x.rows() {
        let mut votes = vec![0usize; classes];
        let mut conf_sum = vec![0.0; classes];
        for z in &logits {
            let p = softmax_row(z.row(i));
            let (best, &top) = p
                .iter()
                .enumerate()
                .fold((0, &p[0]), |acc, (k, v)| if *v > *acc.1 { (k, v) } else { acc });
            if top >= tau {
                votes[best] += 1;
                conf_sum[best] += top;
            }
        }
        let winner = (0..classes).max_by_key(|&k| (votes[k], core::cmp::Reverse(k))).unwrap();
        let unique = votes.iter().enumerate().all(|(k, &v)| k == winner || v < votes[winner]);
        if votes[winner] >= min_votes.max(1) && unique {
            out.indices.push(i);
            out.labels.push(winner);
            out.confidences.push(conf_sum[winner] / votes[winner] as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Model with no hidden layer whose logits are `scale·x` (2 classes).
    fn scaled(scale: f64) -> ModelParams {
        let mut p = ModelParams::zeros(&[2], 2).unwrap();
        p.head.weight = Tensor::from_rows(&[[scale, 0.0], [0.0, scale]]).unwrap();
        p
    }

    fn point(a: f64, b: f64) -> Tensor {
        Tensor::from_rows(&[[a, b]]).unwrap()
    }

    #[test]
    fn agreeing_confident_models_are_accepted() {
        let models = [scaled(10.0), scaled(20.0), scaled(5.0)];
        let s = knowledge_vote(&models, &point(1.0, 0.0), 0.9, 2).unwrap();
        assert_eq!(s.labels, [0]);
        assert!(s.confidences[0] >= 0.9);
    }

    #[test]
    fn split_vote_is_rejected() {
        let models = [scaled(10.0), scaled(-10.0)];
        let s = knowledge_vote(&models, &point(1.0, 0.0), 0.9, 2).unwrap();
        assert_eq!(s.n_accepted(), 0);
        let s = knowledge_vote(&models, &point(1.0, 0.0), 0.9, 1).unwrap();
        assert_eq!(s.n_accepted(), 0, "tie must be rejected");
    }

    #[test]
    fn unconfident_models_do_not_vote() {
        let models = [scaled(0.1), scaled(0.2)];
        let s = knowledge_vote(&models, &point(1.0, 0.0), 0.9, 1).unwrap();
        assert_eq!(s.n_accepted(), 0);
    }

    #[test]
    fn precision_against_truth() {
        let s = PseudoLabeledSet {
            indices: vec![0, 2],
            labels: vec![1, 0],
            confidences: vec![0.95, 0.99],
        };
        assert_eq!(s.precision(&[1, 1, 1]), Some(0.5));
        assert_eq!(PseudoLabeledSet::default().precision(&[]), None);
    }
}
