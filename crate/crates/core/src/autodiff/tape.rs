use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operations the tape can record.
///
/// Binary elementwise ops require identical dims. `AddRowBroadcast` adds a
/// length-`n` vector to every row of an `m×n` matrix. Reductions, `Dot` and
/// `L2Norm` produce scalars of dims `[1]`. `FlattenConcat` takes any number of
/// inputs and returns their row-major concatenation as a vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    MatMul,
    Transpose,
    Relu,
    Exp,
    LogSoftmaxRows,
    ReduceSum,
    ReduceMean,
    Dot,
    L2Norm,
    FlattenConcat,
    AddRowBroadcast,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Scale(_) => "scale",
            OpKind::MatMul => "matmul",
            OpKind::Transpose => "transpose",
            OpKind::Relu => "relu",
            OpKind::Exp => "exp",
            OpKind::LogSoftmaxRows => "log_softmax_rows",
            OpKind::ReduceSum => "reduce_sum",
            OpKind::ReduceMean => "reduce_mean",
            OpKind::Dot => "dot",
            OpKind::L2Norm => "l2_norm",
            OpKind::FlattenConcat => "flatten_concat",
            OpKind::AddRowBroadcast => "add_row_broadcast",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Div
            | OpKind::MatMul
            | OpKind::Dot
            | OpKind::AddRowBroadcast => Some(2),
            OpKind::FlattenConcat => None,
            _ => Some(1),
        }
    }
}

/// Parses an op tag. `scale` carries its constant as `scale(0.5)`.
impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let op = match s {
            "add" => OpKind::Add,
            "sub" => OpKind::Sub,
            "mul" => OpKind::Mul,
            "div" => OpKind::Div,
            "matmul" => OpKind::MatMul,
            "transpose" => OpKind::Transpose,
            "relu" => OpKind::Relu,
            "exp" => OpKind::Exp,
            "log_softmax_rows" => OpKind::LogSoftmaxRows,
            "reduce_sum" => OpKind::ReduceSum,
            "reduce_mean" => OpKind::ReduceMean,
            "dot" => OpKind::Dot,
            "l2_norm" => OpKind::L2Norm,
            "flatten_concat" => OpKind::FlattenConcat,
            "add_row_broadcast" => OpKind::AddRowBroadcast,
            other => {
                let c = other
                    .strip_prefix("scale(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|c| c.trim().parse::<f64>().ok());
                match c {
                    Some(c) => OpKind::Scale(c),
                    None => return Err(Error::Usage(format!("unknown op tag `{other}`"))),
                }
            }
        };
        Ok(op)
    }
}

#[derive(Debug, Clone)]
enum Origin {
    Param,
    Constant,
    Op { kind: OpKind, inputs: Vec<NodeId> },
}

#[derive(Debug, Clone)]
struct Node {
    origin: Origin,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation record. Inputs always precede their outputs.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every parameter leaf of a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    by_param: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.by_param.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Tensor)> {
        self.by_param.iter()
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.item()
    }

    pub fn dims(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.dims()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Origin::Param, value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Origin::Constant, value, false)
    }

    pub fn is_param(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].origin, Origin::Param)
    }

    fn push(&mut self, origin: Origin, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            origin,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn apply(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        if let Some(n) = kind.arity() {
            if inputs.len() != n {
                return Err(Error::Usage(format!(
                    "{} takes {n} inputs, got {}",
                    kind.name(),
                    inputs.len()
                )));
            }
        } else if inputs.is_empty() {
            return Err(Error::Usage(format!("{} needs at least one input", kind.name())));
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::Usage(format!("node {} is not on this tape", bad.0)));
        }
        let value = self.evaluate(kind, inputs)?;
        let requires_grad = inputs.iter().any(|id| self.nodes[id.0].requires_grad);
        Ok(self.push(
            Origin::Op {
                kind,
                inputs: inputs.to_vec(),
            },
            value,
            requires_grad,
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Div, &[a, b])
    }
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.apply(OpKind::Scale(c), &[a])
    }
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Transpose, &[a])
    }
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Relu, &[a])
    }
    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Exp, &[a])
    }
    pub fn log_softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::LogSoftmaxRows, &[a])
    }
    pub fn reduce_sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::ReduceSum, &[a])
    }
    pub fn reduce_mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::ReduceMean, &[a])
    }
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Dot, &[a, b])
    }
    pub fn l2_norm(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::L2Norm, &[a])
    }
    pub fn flatten_concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(OpKind::FlattenConcat, parts)
    }
    pub fn add_row_broadcast(&mut self, m: NodeId, row: NodeId) -> Result<NodeId> {
        self.apply(OpKind::AddRowBroadcast, &[m, row])
    }

    fn evaluate(&self, kind: OpKind, inputs: &[NodeId]) -> Result<Tensor> {
        let op = kind.name();
        let arg = |i: usize| &self.nodes[inputs[i].0].value;
        let same_dims = |a: &Tensor, b: &Tensor| -> Result<()> {
            if a.dims() == b.dims() {
                Ok(())
            } else {
                Err(Error::shape(op, a.dims(), b.dims()))
            }
        };
        let zip = |f: fn(f64, f64) -> f64| -> Result<Tensor> {
            let (a, b) = (arg(0), arg(1));
            same_dims(a, b)?;
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(a.dims().to_vec(), data)
        };
        let map = |a: &Tensor, f: &dyn Fn(f64) -> f64| -> Result<Tensor> {
            Tensor::new(a.dims().to_vec(), a.data().iter().map(|&x| f(x)).collect())
        };

        match kind {
            OpKind::Add => zip(|x, y| x + y),
            OpKind::Sub => zip(|x, y| x - y),
            OpKind::Mul => zip(|x, y| x * y),
            OpKind::Div => zip(|x, y| x / y),
            OpKind::Scale(c) => map(arg(0), &|x| c * x),
            OpKind::Relu => map(arg(0), &|x| if x > 0.0 { x } else { 0.0 }),
            OpKind::Exp => map(arg(0), &libm::exp),
            OpKind::MatMul => {
                let (a, b) = (arg(0), arg(1));
                if a.dims().len() != 2 || b.dims().len() != 2 || a.cols() != b.rows() {
                    return Err(Error::shape(op, a.dims(), b.dims()));
                }
                Ok(matmul(a, b))
            }
            OpKind::Transpose => {
                let a = arg(0);
                if a.dims().len() != 2 {
                    return Err(Error::shape(op, a.dims(), &[]));
                }
                Ok(transpose(a))
            }
            OpKind::LogSoftmaxRows => {
                let a = arg(0);
                if a.dims().len() != 2 {
                    return Err(Error::shape(op, a.dims(), &[]));
                }
                let mut out = Vec::with_capacity(a.len());
                for r in 0..a.rows() {
                    let row = a.row(r);
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + libm::log(row.iter().map(|&x| libm::exp(x - m)).sum::<f64>());
                    out.extend(row.iter().map(|&x| x - lse));
                }
                Tensor::new(a.dims().to_vec(), out)
            }
            OpKind::ReduceSum => Ok(Tensor::scalar(arg(0).data().iter().sum())),
            OpKind::ReduceMean => {
                let a = arg(0);
                Ok(Tensor::scalar(a.data().iter().sum::<f64>() / a.len() as f64))
            }
            OpKind::Dot => {
                let (a, b) = (arg(0), arg(1));
                same_dims(a, b)?;
                Ok(Tensor::scalar(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()))
            }
            OpKind::L2Norm => {
                let a = arg(0);
                Ok(Tensor::scalar(libm::sqrt(a.data().iter().map(|x| x * x).sum())))
            }
            OpKind::FlattenConcat => {
                let mut out = Vec::new();
                for i in 0..inputs.len() {
                    out.extend_from_slice(arg(i).data());
                }
                Ok(Tensor::vector(out))
            }
            OpKind::AddRowBroadcast => {
                let (m, r) = (arg(0), arg(1));
                if m.dims().len() != 2 || r.len() != m.cols() {
                    return Err(Error::shape(op, m.dims(), r.dims()));
                }
                let c = m.cols();
                let data = m
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x + r.data()[i % c])
                    .collect();
                Tensor::new(m.dims().to_vec(), data)
            }
        }
    }

    /// Reverse-mode gradients of the scalar `loss` with respect to every
    /// parameter leaf. Parameters that do not influence `loss` get zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::Contract("backward on an empty tape or foreign node".into()));
        }
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got dims {:?}",
                self.nodes[loss.0].value.dims()
            )));
        }

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Origin::Op { kind, inputs } = &node.origin else {
                continue;
            };
            let Some(dy) = adj[idx].take() else {
                continue;
            };
            self.propagate(*kind, inputs, &node.value, &dy, &mut adj);
            // Parameters keep their adjoint; intermediate buffers are dropped.
        }

        let mut by_param = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.origin, Origin::Param) {
                let g = match adj.get_mut(idx).and_then(Option::take) {
                    Some(data) => Tensor::new(node.value.dims().to_vec(), data)?,
                    None => Tensor::zeros(node.value.dims()),
                };
                by_param.insert(NodeId(idx), g);
            }
        }
        Ok(Gradients { by_param })
    }

    fn propagate(
        &self,
        kind: OpKind,
        inputs: &[NodeId],
        out: &Tensor,
        dy: &[f64],
        adj: &mut [Option<Vec<f64>>],
    ) {
        let val = |i: usize| &self.nodes[inputs[i].0].value;
        let wants = |i: usize| self.nodes[inputs[i].0].requires_grad;
        let mut acc = |i: usize, g: Vec<f64>| {
            let slot = &mut adj[inputs[i].0];
            match slot {
                Some(existing) => existing.iter_mut().zip(g).for_each(|(e, v)| *e += v),
                None => *slot = Some(g),
            }
        };

        match kind {
            OpKind::Add => {
                if wants(0) {
                    acc(0, dy.to_vec());
                }
                if wants(1) {
                    acc(1, dy.to_vec());
                }
            }
            OpKind::Sub => {
                if wants(0) {
                    acc(0, dy.to_vec());
                }
                if wants(1) {
                    acc(1, dy.iter().map(|g| -g).collect());
                }
            }
            OpKind::Mul => {
                let (a, b) = (val(0).data(), val(1).data());
                if wants(0) {
                    acc(0, dy.iter().zip(b).map(|(g, y)| g * y).collect());
                }
                if wants(1) {
                    acc(1, dy.iter().zip(a).map(|(g, x)| g * x).collect());
                }
            }
            OpKind::Div => {
                let (a, b) = (val(0).data(), val(1).data());
                if wants(0) {
                    acc(0, dy.iter().zip(b).map(|(g, y)| g / y).collect());
                }
                if wants(1) {
                    acc(
                        1,
                        dy.iter()
                            .zip(a.iter().zip(b))
                            .map(|(g, (x, y))| -g * x / (y * y))
                            .collect(),
                    );
                }
            }
            OpKind::Scale(c) => acc(0, dy.iter().map(|g| c * g).collect()),
            OpKind::Relu => {
                let x = val(0).data();
                acc(
                    0,
                    dy.iter()
                        .zip(x)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect(),
                );
            }
            OpKind::Exp => acc(0, dy.iter().zip(out.data()).map(|(g, y)| g * y).collect()),
            OpKind::MatMul => {
                // out = A·B, dA = dY·Bᵀ, dB = Aᵀ·dY
                let (a, b) = (val(0), val(1));
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                if wants(0) {
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let g = dy[i * n + j];
                            if g == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                da[i * k + p] += g * b.data()[p * n + j];
                            }
                        }
                    }
                    acc(0, da);
                }
                if wants(1) {
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let x = a.data()[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += x * dy[i * n + j];
                            }
                        }
                    }
                    acc(1, db);
                }
            }
            OpKind::Transpose => {
                // out is (c×r); route back to (r×c)
                let (r, c) = (val(0).rows(), val(0).cols());
                let mut g = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        g[i * c + j] = dy[j * r + i];
                    }
                }
                acc(0, g);
            }
            OpKind::LogSoftmaxRows => {
                let c = out.cols();
                let mut g = Vec::with_capacity(out.len());
                for (row_out, row_dy) in out.data().chunks(c).zip(dy.chunks(c)) {
                    let s: f64 = row_dy.iter().sum();
                    g.extend(
                        row_out
                            .iter()
                            .zip(row_dy)
                            .map(|(&y, &d)| d - libm::exp(y) * s),
                    );
                }
                acc(0, g);
            }
            OpKind::ReduceSum => acc(0, vec![dy[0]; val(0).len()]),
            OpKind::ReduceMean => {
                let n = val(0).len();
                acc(0, vec![dy[0] / n as f64; n]);
            }
            OpKind::Dot => {
                let (a, b) = (val(0).data(), val(1).data());
                if wants(0) {
                    acc(0, b.iter().map(|y| dy[0] * y).collect());
                }
                if wants(1) {
                    acc(1, a.iter().map(|x| dy[0] * x).collect());
                }
            }
            OpKind::L2Norm => {
                let norm = out.item();
                let x = val(0).data();
                if norm > 0.0 {
                    acc(0, x.iter().map(|v| dy[0] * v / norm).collect());
                } else {
                    acc(0, vec![0.0; x.len()]);
                }
            }
            OpKind::FlattenConcat => {
                let mut offset = 0;
                for i in 0..inputs.len() {
                    let n = val(i).len();
                    if wants(i) {
                        acc(i, dy[offset..offset + n].to_vec());
                    }
                    offset += n;
                }
            }
            OpKind::AddRowBroadcast => {
                if wants(0) {
                    acc(0, dy.to_vec());
                }
                if wants(1) {
                    let c = val(1).len();
                    let mut g = vec![0.0; c];
                    for (i, d) in dy.iter().enumerate() {
                        g[i % c] += d;
                    }
                    acc(1, g);
                }
            }
        }
    }
}

fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let x = a.data()[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &b.data()[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    Tensor::matrix(m, n, out).expect("matmul dims")
}

fn transpose(a: &Tensor) -> Tensor {
    let (r, c) = (a.rows(), a.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a.data()[i * c + j];
        }
    }
    Tensor::matrix(c, r, out).expect("transpose dims")
}
