//! Reverse-mode gradient tape over whole tensors.
//!
//! Every operation appends one node holding its output value. Nodes are
//! only ever appended, so the node order is a topological order and
//! [`Tape::backward`] is a single reverse sweep.

use super::kernels::{self, ConvGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower/upper clamp applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    ConvTranspose1d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    Dense {
        x: Var,
        w: Var,
        b: Var,
        batch: usize,
        n: usize,
        m: usize,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
        dim: usize,
    },
    Act {
        x: Var,
        kind: Activation,
    },
    Bce {
        pred: Var,
        target: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        classes: usize,
    },
    Reshape {
        x: Var,
    },
    Concat {
        parts: Vec<(Var, usize)>,
        outer: usize,
        inner: usize,
    },
    Affine {
        x: Var,
        scale: f64,
    },
    Add {
        a: Var,
        b: Var,
    },
    WeightedSum {
        x: Var,
        weights: Vec<f64>,
    },
    Mean {
        x: Var,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of forward operations.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a leaf holding a copy of `t`; it receives a gradient when
    /// `t.requires_grad` is set.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        let mut value = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("valid tensor");
        value.requires_grad = t.requires_grad;
        let rg = t.requires_grad;
        self.push(value, Op::Leaf, rg)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, mut t: Tensor) -> Var {
        t.requires_grad = false;
        t.grad = None;
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Copies the gradient of `v` into `param.grad`, zeros when `v` was not
    /// reached by the backward sweep.
    pub fn store_grad(&self, v: Var, param: &mut Tensor) {
        let g = self
            .grad(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; param.len()]);
        param.grad = Some(g);
    }

    /// `input`: `[C_in, T]` or `[B, C_in, T]`; `kernels`: `[C_out, C_in, K]`.
    pub fn conv1d(&mut self, input: Var, kernels: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let (batch, c_in, t_in, batched) = split_bct(self.shape(input))?;
        let ks = self.shape(kernels).to_vec();
        if ks.len() != 3 || ks[1] != c_in {
            return Err(Error::InvalidShape(format!(
                "conv1d kernels {ks:?} do not match input channels {c_in}"
            )));
        }
        let (c_out, k) = (ks[0], ks[2]);
        check_bias(self.shape(bias), c_out)?;
        if stride == 0 {
            return Err(Error::InvalidShape("stride must be positive".into()));
        }
        if t_in + 2 * padding < k {
            return Err(Error::InvalidShape(format!(
                "conv1d input length {t_in} with padding {padding} shorter than kernel {k}"
            )));
        }
        let t_out = (t_in + 2 * padding - k) / stride + 1;
        let geom = ConvGeom {
            batch,
            c_short: c_out,
            c_long: c_in,
            long: t_in,
            short: t_out,
            k,
            stride,
            pad: padding,
        };
        let mut out = vec![0.0; batch * c_out * t_out];
        kernels::correlate(&geom, self.value(input).data(), self.value(kernels).data(), true, &mut out);
        kernels::add_channel_bias(&mut out, self.value(bias).data(), batch, c_out, t_out);
        let shape = if batched { vec![batch, c_out, t_out] } else { vec![c_out, t_out] };
        let rg = self.rg(&[input, kernels, bias]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Conv1d {
                x: input,
                w: kernels,
                b: bias,
                geom,
            },
            rg,
        ))
    }

    /// `input`: `[C_in, T]` or `[B, C_in, T]`; `kernels`: `[C_in, C_out, K]`.
    pub fn conv1d_transpose(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (batch, c_in, t_in, batched) = split_bct(self.shape(input))?;
        let ks = self.shape(kernels).to_vec();
        if ks.len() != 3 || ks[0] != c_in {
            return Err(Error::InvalidShape(format!(
                "conv1d_transpose kernels {ks:?} do not match input channels {c_in}"
            )));
        }
        let (c_out, k) = (ks[1], ks[2]);
        check_bias(self.shape(bias), c_out)?;
        if stride == 0 {
            return Err(Error::InvalidShape("stride must be positive".into()));
        }
        let t_out = ((t_in - 1) * stride + k) as isize - 2 * padding as isize;
        if t_out <= 0 {
            return Err(Error::InvalidShape(format!(
                "conv1d_transpose output length {t_out} is not positive"
            )));
        }
        let t_out = t_out as usize;
        let geom = ConvGeom {
            batch,
            c_short: c_in,
            c_long: c_out,
            long: t_out,
            short: t_in,
            k,
            stride,
            pad: padding,
        };
        let mut out = vec![0.0; batch * c_out * t_out];
        kernels::scatter(&geom, self.value(input).data(), self.value(kernels).data(), true, &mut out);
        kernels::add_channel_bias(&mut out, self.value(bias).data(), batch, c_out, t_out);
        let shape = if batched { vec![batch, c_out, t_out] } else { vec![c_out, t_out] };
        let rg = self.rg(&[input, kernels, bias]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::ConvTranspose1d {
                x: input,
                w: kernels,
                b: bias,
                geom,
            },
            rg,
        ))
    }

    /// `input`: `[N]` or `[B, N]`; `weights`: `[M, N]`; `bias`: `[M]`.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(input).to_vec();
        let (batch, n, batched) = match xs.as_slice() {
            [n] => (1, *n, false),
            [b, n] => (*b, *n, true),
            _ => return Err(Error::InvalidShape(format!("dense input must be rank 1 or 2, got {xs:?}"))),
        };
        let ws = self.shape(weights).to_vec();
        if ws.len() != 2 || ws[1] != n {
            return Err(Error::InvalidShape(format!(
                "dense weights {ws:?} do not match input width {n}"
            )));
        }
        let m = ws[0];
        check_bias(self.shape(bias), m)?;
        let y = kernels::matvec_batch(
            self.value(input).data(),
            self.value(weights).data(),
            self.value(bias).data(),
            batch,
            n,
            m,
        );
        let shape = if batched { vec![batch, m] } else { vec![m] };
        let rg = self.rg(&[input, weights, bias]);
        Ok(self.push(
            Tensor::new(shape, y)?,
            Op::Dense {
                x: input,
                w: weights,
                b: bias,
                batch,
                n,
                m,
            },
            rg,
        ))
    }

    /// Looks up one row of `table` (`[V, E]`), returning `[E]`.
    pub fn embedding(&mut self, table: Var, index: usize) -> Result<Var> {
        let v = self.embedding_batch(table, &[index])?;
        let dim = self.shape(v)[1];
        self.reshape(v, vec![dim])
    }

    /// Looks up a batch of rows, returning `[B, E]`.
    pub fn embedding_batch(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let ts = self.shape(table).to_vec();
        if ts.len() != 2 {
            return Err(Error::InvalidShape(format!("embedding table must be rank 2, got {ts:?}")));
        }
        if indices.is_empty() {
            return Err(Error::InvalidShape("embedding lookup with no indices".into()));
        }
        let (rows, dim) = (ts[0], ts[1]);
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            if i >= rows {
                return Err(Error::InvalidIndex { index: i, len: rows });
            }
            out.extend_from_slice(&self.value(table).data()[i * dim..(i + 1) * dim]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::new(vec![indices.len(), dim], out)?,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
                dim,
            },
            rg,
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let x = self.value(input);
        let data: Vec<f64> = match kind {
            Activation::LeakyRelu(alpha) => x.data().iter().map(|&v| if v >= 0.0 { v } else { alpha * v }).collect(),
            Activation::Tanh => x.data().iter().map(|v| v.tanh()).collect(),
            Activation::Sigmoid => x.data().iter().map(|&v| sigmoid(v)).collect(),
        };
        let shape = x.shape().to_vec();
        let rg = self.rg(&[input]);
        self.push(Tensor::new(shape, data).unwrap(), Op::Act { x: input, kind }, rg)
    }

    pub fn leaky_relu(&mut self, input: Var, alpha: f64) -> Var {
        self.activation(input, Activation::LeakyRelu(alpha))
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    /// Mean binary cross-entropy, with `pred` clamped to
    /// `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn bce_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred).data();
        if p.len() != target.len() {
            return Err(Error::InvalidShape(format!(
                "bce prediction has {} values, target {}",
                p.len(),
                target.len()
            )));
        }
        let loss = bce_value(p, target);
        let rg = self.rg(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                pred,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy of `[B, K]` logits against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        let (batch, classes) = match s.as_slice() {
            [k] => (1, *k),
            [b, k] => (*b, *k),
            _ => return Err(Error::InvalidShape(format!("logits must be rank 1 or 2, got {s:?}"))),
        };
        if targets.len() != batch {
            return Err(Error::InvalidShape(format!(
                "{} targets for a batch of {batch}",
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::InvalidIndex { index: bad, len: classes });
        }
        let probs = softmax_rows(self.value(logits).data(), classes);
        let loss = -targets
            .iter()
            .enumerate()
            .map(|(b, &t)| probs[b * classes + t].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / batch as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                classes,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let t = Tensor::new(shape, self.value(input).data().to_vec())?;
        let rg = self.rg(&[input]);
        Ok(self.push(t, Op::Reshape { x: input }, rg))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*inputs.first().ok_or_else(|| Error::InvalidShape("concat of nothing".into()))?)
            .to_vec();
        if axis >= first.len() {
            return Err(Error::InvalidShape(format!("concat axis {axis} for rank {}", first.len())));
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut parts = Vec::with_capacity(inputs.len());
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != first.len()
                || s[..axis] != first[..axis]
                || s[axis + 1..] != first[axis + 1..]
            {
                return Err(Error::InvalidShape(format!("cannot concat {s:?} with {first:?} on axis {axis}")));
            }
            parts.push((v, s[axis]));
            total += s[axis];
        }
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &(v, a) in &parts {
                let d = self.value(v).data();
                out.extend_from_slice(&d[o * a * inner..(o + 1) * a * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = self.rg(inputs);
        Ok(self.push(Tensor::new(shape, out)?, Op::Concat { parts, outer, inner }, rg))
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, input: Var, scale: f64, shift: f64) -> Var {
        let x = self.value(input);
        let data = x.data().iter().map(|v| scale * v + shift).collect();
        let shape = x.shape().to_vec();
        let rg = self.rg(&[input]);
        self.push(Tensor::new(shape, data).unwrap(), Op::Affine { x: input, scale }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::InvalidShape(format!(
                "add of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add { a, b }, rg))
    }

    /// Scalar `sum_i weights[i] * x[i]`.
    pub fn weighted_sum(&mut self, input: Var, weights: &[f64]) -> Result<Var> {
        let x = self.value(input).data();
        if x.len() != weights.len() {
            return Err(Error::InvalidShape(format!(
                "weighted sum over {} values with {} weights",
                x.len(),
                weights.len()
            )));
        }
        let s = x.iter().zip(weights).map(|(a, b)| a * b).sum();
        let rg = self.rg(&[input]);
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x: input,
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let n = self.value(input).len();
        self.weighted_sum(input, &vec![1.0; n]).unwrap()
    }

    pub fn mean(&mut self, input: Var) -> Var {
        let x = self.value(input).data();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let rg = self.rg(&[input]);
        self.push(Tensor::scalar(m), Op::Mean { x: input }, rg)
    }

    /// Populates gradients of the scalar `loss` with respect to every node
    /// that depends on a `requires_grad` leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(i, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                if self.wants(*x) {
                    let g = slot(grads, *x, self.value(*x).len());
                    kernels::scatter(geom, gy, self.value(*w).data(), true, g);
                }
                if self.wants(*w) {
                    let g = slot(grads, *w, self.value(*w).len());
                    kernels::kernel_grad(geom, self.value(*x).data(), gy, true, g);
                }
                if self.wants(*b) {
                    let g = slot(grads, *b, geom.c_short);
                    kernels::channel_bias_grad(gy, geom.batch, geom.c_short, geom.short, g);
                }
            }
            Op::ConvTranspose1d { x, w, b, geom } => {
                if self.wants(*x) {
                    let g = slot(grads, *x, self.value(*x).len());
                    kernels::correlate(geom, gy, self.value(*w).data(), true, g);
                }
                if self.wants(*w) {
                    let g = slot(grads, *w, self.value(*w).len());
                    kernels::kernel_grad(geom, gy, self.value(*x).data(), true, g);
                }
                if self.wants(*b) {
                    let g = slot(grads, *b, geom.c_long);
                    kernels::channel_bias_grad(gy, geom.batch, geom.c_long, geom.long, g);
                }
            }
            Op::Dense { x, w, b, batch, n, m } => {
                let (batch, n, m) = (*batch, *n, *m);
                if self.wants(*x) {
                    let wd = self.value(*w).data();
                    let g = slot(grads, *x, batch * n);
                    for bi in 0..batch {
                        let gx = &mut g[bi * n..(bi + 1) * n];
                        for j in 0..m {
                            let gj = gy[bi * m + j];
                            if gj == 0.0 {
                                continue;
                            }
                            for (a, wv) in gx.iter_mut().zip(&wd[j * n..(j + 1) * n]) {
                                *a += gj * wv;
                            }
                        }
                    }
                }
                if self.wants(*w) {
                    let xd = self.value(*x).data();
                    let g = slot(grads, *w, m * n);
                    for bi in 0..batch {
                        let xb = &xd[bi * n..(bi + 1) * n];
                        for j in 0..m {
                            let gj = gy[bi * m + j];
                            if gj == 0.0 {
                                continue;
                            }
                            for (a, xv) in g[j * n..(j + 1) * n].iter_mut().zip(xb) {
                                *a += gj * xv;
                            }
                        }
                    }
                }
                if self.wants(*b) {
                    let g = slot(grads, *b, m);
                    for bi in 0..batch {
                        for (a, v) in g.iter_mut().zip(&gy[bi * m..(bi + 1) * m]) {
                            *a += v;
                        }
                    }
                }
            }
            Op::Embedding { table, indices, dim } => {
                if self.wants(*table) {
                    let g = slot(grads, *table, self.value(*table).len());
                    for (r, &idx) in indices.iter().enumerate() {
                        for (a, v) in g[idx * dim..(idx + 1) * dim].iter_mut().zip(&gy[r * dim..(r + 1) * dim]) {
                            *a += v;
                        }
                    }
                }
            }
            Op::Act { x, kind } => {
                if self.wants(*x) {
                    let xv = self.value(*x).data();
                    let yv = node.value.data();
                    let g = slot(grads, *x, xv.len());
                    match kind {
                        Activation::LeakyRelu(alpha) => {
                            for ((a, &xi), &gi) in g.iter_mut().zip(xv).zip(gy) {
                                *a += if xi >= 0.0 { gi } else { alpha * gi };
                            }
                        }
                        Activation::Tanh => {
                            for ((a, &yi), &gi) in g.iter_mut().zip(yv).zip(gy) {
                                *a += gi * (1.0 - yi * yi);
                            }
                        }
                        Activation::Sigmoid => {
                            for ((a, &yi), &gi) in g.iter_mut().zip(yv).zip(gy) {
                                *a += gi * yi * (1.0 - yi);
                            }
                        }
                    }
                }
            }
            Op::Bce { pred, target } => {
                if self.wants(*pred) {
                    let p = self.value(*pred).data();
                    let n = p.len() as f64;
                    let g = slot(grads, *pred, p.len());
                    for ((a, &pi), &ti) in g.iter_mut().zip(p).zip(target) {
                        // zero slope where the clamp is active
                        if pi <= PROB_EPS || pi >= 1.0 - PROB_EPS {
                            continue;
                        }
                        *a += gy[0] * (pi - ti) / (pi * (1.0 - pi) * n);
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                classes,
            } => {
                if self.wants(*logits) {
                    let k = *classes;
                    let probs = softmax_rows(self.value(*logits).data(), k);
                    let scale = gy[0] / targets.len() as f64;
                    let g = slot(grads, *logits, probs.len());
                    for (b, &t) in targets.iter().enumerate() {
                        for j in 0..k {
                            let ind = if j == t { 1.0 } else { 0.0 };
                            g[b * k + j] += scale * (probs[b * k + j] - ind);
                        }
                    }
                }
            }
            Op::Reshape { x } => {
                if self.wants(*x) {
                    let g = slot(grads, *x, gy.len());
                    for (a, v) in g.iter_mut().zip(gy) {
                        *a += v;
                    }
                }
            }
            Op::Concat { parts, outer, inner } => {
                let total: usize = parts.iter().map(|p| p.1).sum();
                let mut offset = 0;
                for &(v, a) in parts {
                    if self.wants(v) {
                        let g = slot(grads, v, outer * a * inner);
                        for o in 0..*outer {
                            let src = &gy[(o * total + offset) * inner..(o * total + offset + a) * inner];
                            for (d, s) in g[o * a * inner..(o + 1) * a * inner].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += a;
                }
            }
            Op::Affine { x, scale } => {
                if self.wants(*x) {
                    let g = slot(grads, *x, gy.len());
                    for (a, v) in g.iter_mut().zip(gy) {
                        *a += scale * v;
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if self.wants(v) {
                        let g = slot(grads, v, gy.len());
                        for (d, s) in g.iter_mut().zip(gy) {
                            *d += s;
                        }
                    }
                }
            }
            Op::WeightedSum { x, weights } => {
                if self.wants(*x) {
                    let g = slot(grads, *x, weights.len());
                    for (a, w) in g.iter_mut().zip(weights) {
                        *a += gy[0] * w;
                    }
                }
            }
            Op::Mean { x } => {
                if self.wants(*x) {
                    let n = self.value(*x).len();
                    let g = slot(grads, *x, n);
                    let s = gy[0] / n as f64;
                    for a in g.iter_mut() {
                        *a += s;
                    }
                }
            }
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn split_bct(shape: &[usize]) -> Result<(usize, usize, usize, bool)> {
    match shape {
        [c, t] => Ok((1, *c, *t, false)),
        [b, c, t] => Ok((*b, *c, *t, true)),
        _ => Err(Error::InvalidShape(format!(
            "expected [C, T] or [B, C, T], got {shape:?}"
        ))),
    }
}

fn check_bias(shape: &[usize], channels: usize) -> Result<()> {
    if shape != [channels] {
        return Err(Error::InvalidShape(format!(
            "bias shape {shape:?}, expected [{channels}]"
        )));
    }
    Ok(())
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Clamped mean binary cross-entropy. The mean is taken around the first
/// term so a batch of identical terms averages to that term exactly.
pub fn bce_value(pred: &[f64], target: &[f64]) -> f64 {
    let terms: Vec<f64> = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .collect();
    let Some(&first) = terms.first() else {
        return f64::NAN;
    };
    first + terms.iter().map(|l| l - first).sum::<f64>() / terms.len() as f64
}

/// Row-wise numerically stable softmax over rows of width `k`.
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        out.extend(e.into_iter().map(|v| v / z));
    }
    out
}
