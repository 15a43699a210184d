//! Local model `M = F ∘ C`: a ReLU MLP feature extractor followed by a linear
//! classifier head.
//!
//! Flattening order is fixed: feature layers in order, each weight row-major
//! then its bias, then the head weight row-major and the head bias. The same
//! order is used for aggregation, checkpoints and flat gradients.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Gradients, NodeId, Tape, Tensor};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Dense layer computing `x·Wᵀ + b` with `W` of dims `d_out×d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[d_out, d_in]),
            bias: Tensor::zeros(&[d_out]),
        }
    }

    fn he<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let std = libm::sqrt(2.0 / d_in as f64);
        let data = (0..d_in * d_out)
            .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect::<Vec<f64>>();
        Linear {
            weight: Tensor::matrix(d_out, d_in, data).expect("linear dims"),
            bias: Tensor::zeros(&[d_out]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Vec<usize>,
    classes: usize,
    pub layers: Vec<Linear>,
    pub head: Linear,
}

/// Frozen classifier head of one domain from the previous round.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSnapshot {
    pub domain_id: usize,
    pub round: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Tape handles for a registered [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub layers: Vec<(NodeId, NodeId)>,
    pub head_weight: NodeId,
    pub head_bias: NodeId,
}

fn check_arch(arch: &[usize], classes: usize) -> Result<()> {
    if arch.is_empty() {
        return Err(Error::Usage("architecture must list at least the input width".into()));
    }
    if arch.contains(&0) {
        return Err(Error::Usage(format!("layer widths must be >= 1, got {arch:?}")));
    }
    if classes < 2 {
        return Err(Error::Usage(format!("need at least 2 classes, got {classes}")));
    }
    Ok(())
}

impl ModelParams {
    /// He-initialized weights (`N(0, 2/d_in)`), zero biases.
    pub fn init(arch: &[usize], classes: usize, seed: u64) -> Result<Self> {
        check_arch(arch, classes)?;
        let mut rng = stream(seed, Stream::Init, 0, 0);
        let layers = arch
            .windows(2)
            .map(|w| Linear::he(w[0], w[1], &mut rng))
            .collect();
        let head = Linear::he(*arch.last().unwrap(), classes, &mut rng);
        Ok(ModelParams {
            arch: arch.to_vec(),
            classes,
            layers,
            head,
        })
    }

    pub fn zeros(arch: &[usize], classes: usize) -> Result<Self> {
        check_arch(arch, classes)?;
        Ok(ModelParams {
            arch: arch.to_vec(),
            classes,
            layers: arch.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
            head: Linear::zeros(*arch.last().unwrap(), classes),
        })
    }

    pub fn arch(&self) -> &[usize] {
        &self.arch
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.arch[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.arch.last().unwrap()
    }

    pub fn param_count(arch: &[usize], classes: usize) -> usize {
        let features: usize = arch.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        features + arch.last().map_or(0, |&d| d * classes + classes)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(Self::param_count(&self.arch, self.classes));
        for l in self.layers.iter().chain(core::iter::once(&self.head)) {
            flat.extend_from_slice(l.weight.data());
            flat.extend_from_slice(l.bias.data());
        }
        flat
    }

    pub fn unflatten(arch: &[usize], classes: usize, flat: &[f64]) -> Result<Self> {
        check_arch(arch, classes)?;
        let expected = Self::param_count(arch, classes);
        if flat.len() != expected {
            return Err(Error::shape("unflatten", &[expected], &[flat.len()]));
        }
        let mut p = Self::zeros(arch, classes)?;
        let mut rest = flat;
        for l in p.layers.iter_mut().chain(core::iter::once(&mut p.head)) {
            for t in [&mut l.weight, &mut l.bias] {
                let (head, tail) = rest.split_at(t.len());
                t.data_mut().copy_from_slice(head);
                rest = tail;
            }
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .chain(core::iter::once(&self.head))
            .all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.arch == other.arch && self.classes == other.classes
    }

    /// Registers every tensor as a trainable leaf.
    pub fn register(&self, tape: &mut Tape) -> ModelVars {
        let layers = self
            .layers
            .iter()
            .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
            .collect();
        ModelVars {
            layers,
            head_weight: tape.param(self.head.weight.clone()),
            head_bias: tape.param(self.head.bias.clone()),
        }
    }

    pub fn head_snapshot(&self, domain_id: usize, round: usize) -> HeadSnapshot {
        HeadSnapshot {
            domain_id,
            round,
            weight: self.head.weight.clone(),
            bias: self.head.bias.clone(),
        }
    }

    /// Logits for a batch, evaluated on a scratch tape.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let xn = tape.constant(x.clone());
        let (_, z) = forward(&mut tape, &vars, xn)?;
        Ok(tape.value(z).clone())
    }
}

impl HeadSnapshot {
    pub fn matches(&self, params: &ModelParams) -> bool {
        self.weight.dims() == params.head.weight.dims() && self.bias.dims() == params.head.bias.dims()
    }
}

impl ModelVars {
    /// Gradient of every parameter in flattening order.
    pub fn flat_gradient(&self, grads: &Gradients) -> Vec<f64> {
        let mut flat = Vec::new();
        let ids = self
            .layers
            .iter()
            .flat_map(|&(w, b)| [w, b])
            .chain([self.head_weight, self.head_bias]);
        for id in ids {
            flat.extend_from_slice(grads.get(id).expect("registered parameter").data());
        }
        flat
    }
}

/// Returns `(H, Z)`: features after the last ReLU layer and class logits.
pub fn forward(tape: &mut Tape, vars: &ModelVars, x: NodeId) -> Result<(NodeId, NodeId)> {
    let mut h = x;
    for &(w, b) in &vars.layers {
        let wt = tape.transpose(w)?;
        let pre = tape.matmul(h, wt)?;
        let pre = tape.add_row_broadcast(pre, b)?;
        h = tape.relu(pre)?;
    }
    let wt = tape.transpose(vars.head_weight)?;
    let z = tape.matmul(h, wt)?;
    let z = tape.add_row_broadcast(z, vars.head_bias)?;
    Ok((h, z))
}
