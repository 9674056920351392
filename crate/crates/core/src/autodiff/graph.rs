//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the node vector is always a
//! valid topological order and the backward sweep is a reverse scan.

use std::fmt;
use std::str::FromStr;

use super::tensor::{matmul_raw, transpose_raw, Tensor};
use crate::error::{dim_err, Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Names of the differentiable primitives, used for reporting and for
/// deliberately corrupting a gradient rule in verification harnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Tanh,
    Sigmoid,
    Relu,
    Abs,
    Softmax,
    LogSoftmax,
    Concat,
    Slice,
    Transpose,
    Sum,
    NormalizeRows,
    Gather,
}

impl Primitive {
    pub const ALL: [Primitive; 18] = [
        Primitive::Leaf,
        Primitive::MatMul,
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Scale,
        Primitive::Tanh,
        Primitive::Sigmoid,
        Primitive::Relu,
        Primitive::Abs,
        Primitive::Softmax,
        Primitive::LogSoftmax,
        Primitive::Concat,
        Primitive::Slice,
        Primitive::Transpose,
        Primitive::Sum,
        Primitive::NormalizeRows,
        Primitive::Gather,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Leaf => "leaf",
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale => "scale",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Relu => "relu",
            Primitive::Abs => "abs",
            Primitive::Softmax => "softmax",
            Primitive::LogSoftmax => "log_softmax",
            Primitive::Concat => "concat",
            Primitive::Slice => "slice",
            Primitive::Transpose => "transpose",
            Primitive::Sum => "sum",
            Primitive::NormalizeRows => "normalize_rows",
            Primitive::Gather => "gather",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown primitive `{s}`")))
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add { a: Var, b: Var, broadcast: bool },
    Sub { a: Var, b: Var, broadcast: bool },
    Mul { a: Var, b: Var, broadcast: bool },
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Abs(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Transpose(Var),
    Sum(Var),
    NormalizeRows { input: Var, inv_std: Vec<f64> },
    Gather { input: Var, indices: Vec<usize> },
}

impl Op {
    fn primitive(&self) -> Primitive {
        match self {
            Op::Leaf => Primitive::Leaf,
            Op::MatMul(..) => Primitive::MatMul,
            Op::Add { .. } => Primitive::Add,
            Op::Sub { .. } => Primitive::Sub,
            Op::Mul { .. } => Primitive::Mul,
            Op::Scale(..) => Primitive::Scale,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Sigmoid(_) => Primitive::Sigmoid,
            Op::Relu(_) => Primitive::Relu,
            Op::Abs(_) => Primitive::Abs,
            Op::Softmax(_) => Primitive::Softmax,
            Op::LogSoftmax(_) => Primitive::LogSoftmax,
            Op::Concat { .. } => Primitive::Concat,
            Op::Slice { .. } => Primitive::Slice,
            Op::Transpose(_) => Primitive::Transpose,
            Op::Sum(_) => Primitive::Sum,
            Op::NormalizeRows { .. } => Primitive::NormalizeRows,
            Op::Gather { .. } => Primitive::Gather,
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Epsilon inside the square root of [`Graph::normalize_rows`].
pub const NORM_EPS: f64 = 1e-9;

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    fault: Option<Primitive>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scales the backward rule of `primitive` by 1.01. Only useful for
    /// checking that gradient verification notices a broken rule.
    pub fn inject_fault(&mut self, primitive: Primitive) {
        self.fault = Some(primitive);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` call's loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn primitive(&self, v: Var) -> Primitive {
        self.nodes[v.0].op.primitive()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(dim_err(format!(
                "matmul of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], data)?, Op::MatMul(a, b), rg))
    }

    /// Same shapes, or `b` a vector matching the trailing extent of `a`.
    fn broadcast_kind(&self, a: Var, b: Var, what: &str) -> Result<bool> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            return Ok(false);
        }
        if sb.len() == 1 && sa.len() >= 2 && sa.last() == sb.last() {
            return Ok(true);
        }
        Err(dim_err(format!("{what} of incompatible shapes {sa:?} and {sb:?}")))
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let broadcast = self.broadcast_kind(a, b, what)?;
        let va = self.value(a);
        let vb = self.value(b).data();
        let n = vb.len();
        let data = va.data().iter().enumerate().map(|(i, &x)| f(x, vb[i % n])).collect();
        Ok((Tensor::new(va.shape().to_vec(), data)?, broadcast))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, broadcast) = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add { a, b, broadcast }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, broadcast) = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Sub { a, b, broadcast }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, broadcast) = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul { a, b, broadcast }, rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(t, Op::Scale(a, factor), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(t, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(t, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push(t, Op::Relu(a), rg)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::abs);
        let rg = self.rg(&[a]);
        self.push(t, Op::Abs(a), rg)
    }

    fn last_axis(&self, a: Var, what: &str) -> Result<usize> {
        let v = self.value(a);
        let d = v.shape().last().copied().unwrap_or(1);
        if d == 0 {
            return Err(dim_err(format!("{what} over an empty axis")));
        }
        if v.data().iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric(format!("{what} input contains NaN")));
        }
        Ok(d)
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let d = self.last_axis(a, "softmax")?;
        let v = self.value(a);
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(d) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::Softmax(a), rg))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let d = self.last_axis(a, "log_softmax")?;
        let v = self.value(a);
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(d) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::LogSoftmax(a), rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| dim_err("concat of zero tensors"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(dim_err(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(dim_err(format!("concat of {base:?} and {s:?} along axis {axis}")));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let chunk = self.shape(v)[axis] * inner;
                data.extend_from_slice(&self.value(v).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(inputs);
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat { inputs: inputs.to_vec(), axis }, rg))
    }

    /// `len` consecutive entries along `axis` starting at `start`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(dim_err(format!("slice {start}..{} on axis {axis} of {shape:?}", start + len)));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * shape[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(&[input]);
        Ok(self.push(Tensor::new(out_shape, data)?, Op::Slice { input, axis, start }, rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.value(a).dims2()?;
        let data = transpose_raw(self.value(a).data(), r, c);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(vec![c, r], data)?, Op::Transpose(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    /// Per-row standardization over the last axis: zero mean, unit variance.
    pub fn normalize_rows(&mut self, input: Var) -> Result<Var> {
        let v = self.value(input);
        let d = *v.shape().last().ok_or_else(|| dim_err("normalize_rows of a scalar"))?;
        let mut out = v.data().to_vec();
        let mut inv_std = Vec::with_capacity(out.len() / d.max(1));
        for row in out.chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * inv;
            }
            inv_std.push(inv);
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(&[input]);
        Ok(self.push(t, Op::NormalizeRows { input, inv_std }, rg))
    }

    /// Picks flat positions of `input` into a vector.
    pub fn gather(&mut self, input: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(input).data();
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
            return Err(dim_err(format!("gather index {bad} out of range for {} elements", src.len())));
        }
        let data = indices.iter().map(|&i| src[i]).collect();
        let rg = self.rg(&[input]);
        Ok(self.push(Tensor::vector(data), Op::Gather { input, indices: indices.to_vec() }, rg))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from the scalar `loss`. Afterwards every node that
    /// requires a gradient holds one; nodes the loss does not depend on get zeros.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let faulty = self.fault == Some(node.op.primitive());
            let g = if faulty { g.iter().map(|x| x * 1.01).collect() } else { g };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.value.len()]);
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        let mut acc = |v: Var, contrib: Vec<f64>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(&contrib).for_each(|(e, c)| *e += c),
                slot => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.nodes[a.0].value.dims2().expect("checked in forward");
                let n = node.value.shape()[1];
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                if self.nodes[a.0].requires_grad {
                    acc(*a, matmul_raw(g, &transpose_raw(bv, k, n), m, n, k));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, matmul_raw(&transpose_raw(av, m, k), g, k, m, n));
                }
            }
            Op::Add { a, b, broadcast } => {
                acc(*a, g.to_vec());
                acc(*b, reduce_broadcast(g.to_vec(), self.nodes[b.0].value.len(), *broadcast));
            }
            Op::Sub { a, b, broadcast } => {
                acc(*a, g.to_vec());
                let neg = g.iter().map(|x| -x).collect();
                acc(*b, reduce_broadcast(neg, self.nodes[b.0].value.len(), *broadcast));
            }
            Op::Mul { a, b, broadcast } => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                let nb = bv.len();
                acc(*a, g.iter().enumerate().map(|(i, gi)| gi * bv[i % nb]).collect());
                let gb = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                acc(*b, reduce_broadcast(gb, nb, *broadcast));
            }
            Op::Scale(a, f) => acc(*a, g.iter().map(|x| x * f).collect()),
            Op::Tanh(a) => acc(*a, g.iter().zip(out).map(|(gi, y)| gi * (1.0 - y * y)).collect()),
            Op::Sigmoid(a) => acc(*a, g.iter().zip(out).map(|(gi, y)| gi * y * (1.0 - y)).collect()),
            Op::Relu(a) => {
                let x = self.nodes[a.0].value.data();
                acc(*a, g.iter().zip(x).map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 }).collect())
            }
            Op::Abs(a) => {
                let x = self.nodes[a.0].value.data();
                acc(*a, g.iter().zip(x).map(|(gi, xi)| gi * sign(*xi)).collect())
            }
            Op::Softmax(a) => {
                let d = *node.value.shape().last().unwrap_or(&1);
                let mut dx = vec![0.0; g.len()];
                for ((dxr, gr), yr) in dx.chunks_mut(d).zip(g.chunks(d)).zip(out.chunks(d)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in dxr.iter_mut().zip(gr).zip(yr) {
                        *o = yi * (gi - dot);
                    }
                }
                acc(*a, dx);
            }
            Op::LogSoftmax(a) => {
                let d = *node.value.shape().last().unwrap_or(&1);
                let mut dx = vec![0.0; g.len()];
                for ((dxr, gr), yr) in dx.chunks_mut(d).zip(g.chunks(d)).zip(out.chunks(d)) {
                    let total: f64 = gr.iter().sum();
                    for ((o, gi), yi) in dxr.iter_mut().zip(gr).zip(yr) {
                        *o = gi - yi.exp() * total;
                    }
                }
                acc(*a, dx);
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let mut parts: Vec<Vec<f64>> =
                    inputs.iter().map(|v| Vec::with_capacity(self.nodes[v.0].value.len())).collect();
                let mut offset = 0;
                for _ in 0..outer {
                    for (part, v) in parts.iter_mut().zip(inputs) {
                        let chunk = self.nodes[v.0].value.shape()[*axis] * inner;
                        part.extend_from_slice(&g[offset..offset + chunk]);
                        offset += chunk;
                    }
                }
                for (v, part) in inputs.iter().zip(parts) {
                    acc(*v, part);
                }
            }
            Op::Slice { input, axis, start } => {
                let in_shape = self.nodes[input.0].value.shape();
                let len = node.value.shape()[*axis];
                let outer: usize = in_shape[..*axis].iter().product();
                let inner: usize = in_shape[axis + 1..].iter().product();
                let mut dx = vec![0.0; self.nodes[input.0].value.len()];
                for o in 0..outer {
                    let base = (o * in_shape[*axis] + start) * inner;
                    dx[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                acc(*input, dx);
            }
            Op::Transpose(a) => {
                let (r, c) = (node.value.shape()[0], node.value.shape()[1]);
                acc(*a, transpose_raw(g, r, c));
            }
            Op::Sum(a) => acc(*a, vec![g[0]; self.nodes[a.0].value.len()]),
            Op::NormalizeRows { input, inv_std } => {
                let d = *node.value.shape().last().unwrap_or(&1);
                let mut dx = vec![0.0; g.len()];
                for (((dxr, gr), yr), inv) in dx.chunks_mut(d).zip(g.chunks(d)).zip(out.chunks(d)).zip(inv_std) {
                    let mean_g = gr.iter().sum::<f64>() / d as f64;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for ((o, gi), yi) in dxr.iter_mut().zip(gr).zip(yr) {
                        *o = inv * (gi - mean_g - yi * mean_gy);
                    }
                }
                acc(*input, dx);
            }
            Op::Gather { input, indices } => {
                let mut dx = vec![0.0; self.nodes[input.0].value.len()];
                for (&i, gi) in indices.iter().zip(g) {
                    dx[i] += gi;
                }
                acc(*input, dx);
            }
        }
    }
}

fn reduce_broadcast(g: Vec<f64>, target_len: usize, broadcast: bool) -> Vec<f64> {
    if !broadcast {
        return g;
    }
    let mut out = vec![0.0; target_len];
    for row in g.chunks(target_len) {
        out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sign with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
