//! Reverse-mode automatic differentiation over a Wengert tape.
//!
//! Every primitive appends one node to the tape. Nodes are only ever
//! appended, so the node index order is a topological order and the
//! backward pass is a single reverse sweep.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{
    self, ensure_finite, gelu_grad_scalar, gemm_into, layer_norm_kernel, softmax_row_in_place,
    Float, GeluKind, MatRef, Tensor,
};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Static description of a batched multi-head attention call.
#[derive(Clone, Debug)]
pub struct AttentionShape {
    pub batch: usize,
    pub seq_len: usize,
    pub heads: usize,
    /// `[batch × seq_len]`, true where the key position is a real token.
    pub key_mask: Vec<bool>,
}

enum Op<T: Float> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        transpose_b: bool,
    },
    Add(Var, Var),
    Mul(Var, Var),
    AddBias {
        x: Var,
        bias: Var,
    },
    Scale {
        x: Var,
        factor: T,
    },
    Sum(Var),
    Gelu {
        x: Var,
        kind: GeluKind,
    },
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<T>,
        inv_std: Vec<T>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        shape: AttentionShape,
        /// Post-softmax probabilities, `[batch × heads × seq × seq]`.
        probs: Vec<T>,
        /// Scaled keep-mask applied to `probs`, same layout.
        dropout: Option<Vec<T>>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<Option<usize>>,
        probs: Vec<T>,
        count: usize,
    },
}

struct Node<T: Float> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records primitive applications for one forward/backward cycle.
///
/// A tape built with [`Tape::inference`] still evaluates every primitive
/// but stores no backward state, so it is the cheap path for evaluation.
pub struct Tape<T: Float = f64> {
    nodes: Vec<Node<T>>,
    recording: bool,
}

impl<T: Float> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            recording: true,
        }
    }

    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf whose gradient is wanted.
    pub fn param(&mut self, value: impl Into<Arc<Tensor<T>>>) -> Var {
        self.leaf(value.into(), true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&mut self, value: impl Into<Arc<Tensor<T>>>) -> Var {
        self.leaf(value.into(), false)
    }

    fn leaf(&mut self, value: Arc<Tensor<T>>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: requires_grad && self.recording,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        value.ensure_finite(op_name)?;
        let requires_grad = self.recording && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        self.push("matmul", out, Op::MatMul { a, b, transpose_b: false }, &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul_nt(self.value(a), self.value(b))?;
        self.push("matmul_nt", out, Op::MatMul { a, b, transpose_b: true }, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape("add", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p + q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape("mul", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Adds a `[n]` vector to every row of `[..., n]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let n = xv.last_dim();
        if bv.shape() != [n] {
            return Err(Error::shape("add_bias", xv.shape(), bv.shape()));
        }
        let b = bv.data();
        let data = xv.data().iter().enumerate().map(|(i, &p)| p + b[i % n]).collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        self.push("add_bias", out, Op::AddBias { x, bias }, &[x, bias])
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let factor = T::from_f64(factor);
        let xv = self.value(x);
        let out = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|&p| p * factor).collect())?;
        self.push("scale", out, Op::Scale { x, factor }, &[x])
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().copied().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn gelu(&mut self, x: Var, kind: GeluKind) -> Result<Var> {
        let out = tensor::gelu(self.value(x), kind)?;
        self.push("gelu", out, Op::Gelu { x, kind }, &[x])
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = tensor::softmax(self.value(x), axis)?;
        self.push("softmax", out, Op::Softmax { x, axis }, &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xv, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let h = xv.last_dim();
        if g.shape() != [h] || b.shape() != [h] {
            return Err(Error::shape("layer_norm", xv.shape(), g.shape()));
        }
        if eps <= 0.0 {
            return Err(Error::Contract(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let ln = layer_norm_kernel(xv.data(), h, g.data(), b.data(), T::from_f64(eps));
        let out = Tensor::new(xv.shape().to_vec(), ln.output)?;
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            normalized: if self.recording { ln.normalized } else { Vec::new() },
            inv_std: ln.inv_std,
        };
        self.push("layer_norm", out, op, &[x, gamma, beta])
    }

    /// Inverted dropout. With `p == 0` this is the identity and adds no node.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(x);
        }
        if p >= 1.0 {
            return Err(Error::Contract(format!("dropout probability must be < 1, got {p}")));
        }
        let mask = dropout_mask::<T, R>(self.value(x).len(), p, rng);
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        self.push("dropout", out, Op::Dropout { x, mask }, &[x])
    }

    /// Selects rows of a `[rows × n]` table.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return Err(Error::shape("gather", tv.shape(), &[ids.len()]));
        }
        let (rows, n) = (tv.shape()[0], tv.shape()[1]);
        let mut data = Vec::with_capacity(ids.len() * n);
        for &id in ids {
            if id >= rows {
                return Err(Error::Input(format!("gather index {id} out of range for {rows} rows")));
            }
            data.extend_from_slice(tv.row(id));
        }
        let out = Tensor::new(vec![ids.len(), n], data)?;
        self.push("gather", out, Op::Gather { table, ids: ids.to_vec() }, &[table])
    }

    /// Scaled dot-product multi-head self-attention.
    ///
    /// `q`, `k`, `v` are `[batch·seq × hidden]`; masked keys get exactly zero
    /// probability. `dropout` is `(p, rng)` applied to the probabilities.
    pub fn attention<R: Rng + ?Sized>(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        shape: AttentionShape,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<Var> {
        let (b, t, a) = (shape.batch, shape.seq_len, shape.heads);
        let hidden = self.value(q).last_dim();
        let expected = [b * t, hidden];
        for var in [q, k, v] {
            if self.shape(var) != expected {
                return Err(Error::shape("attention", self.shape(var), &expected));
            }
        }
        if a == 0 || !hidden.is_multiple_of(a) {
            return Err(Error::Contract(format!("hidden size {hidden} not divisible by {a} heads")));
        }
        if shape.key_mask.len() != b * t {
            return Err(Error::shape("attention mask", &[shape.key_mask.len()], &[b * t]));
        }
        for s in 0..b {
            if !shape.key_mask[s * t..(s + 1) * t].iter().any(|&m| m) {
                return Err(Error::Input(format!("sequence {s} has no attendable tokens")));
            }
        }
        let drop_mask = match dropout {
            Some((p, rng)) if p > 0.0 => Some(dropout_mask::<T, R>(b * a * t * t, p, rng)),
            _ => None,
        };
        let d = hidden / a;
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        let (qd, kd, vd) = (self.value(q).data(), self.value(k).data(), self.value(v).data());

        let heads: Vec<(Vec<T>, Vec<T>)> = (0..b * a)
            .into_par_iter()
            .map(|bh| {
                let (s, h) = (bh / a, bh % a);
                let view = |data| head_view(data, s, h, t, d, hidden);
                let mut scores = vec![T::ZERO; t * t];
                gemm_into(view(qd), view(kd).t(), &mut scores, false);
                let mask = &shape.key_mask[s * t..(s + 1) * t];
                for row in scores.chunks_mut(t) {
                    masked_softmax(row, mask, scale);
                }
                let mut used = scores.clone();
                if let Some(dm) = &drop_mask {
                    let off = bh * t * t;
                    for (u, &m) in used.iter_mut().zip(&dm[off..off + t * t]) {
                        *u *= m;
                    }
                }
                let mut ctx = vec![T::ZERO; t * d];
                gemm_into(MatRef::row_major(&used, t, t), view(vd), &mut ctx, false);
                (scores, ctx)
            })
            .collect();

        let mut out = vec![T::ZERO; b * t * hidden];
        let mut probs = Vec::with_capacity(if self.recording { b * a * t * t } else { 0 });
        for (bh, (p, ctx)) in heads.into_iter().enumerate() {
            let (s, h) = (bh / a, bh % a);
            for i in 0..t {
                let dst = (s * t + i) * hidden + h * d;
                out[dst..dst + d].copy_from_slice(&ctx[i * d..(i + 1) * d]);
            }
            probs.extend(p);
        }
        let out = Tensor::new(vec![b * t, hidden], out)?;
        let op = Op::Attention {
            q,
            k,
            v,
            shape,
            probs,
            dropout: drop_mask,
        };
        self.push("attention", out, op, &[q, k, v])
    }

    /// Attention probabilities recorded for an attention node, laid out
    /// `[batch × heads × seq × seq]`, or `None` when the tape is not recording.
    pub fn attention_probs(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } if !probs.is_empty() => Some(probs),
            _ => None,
        }
    }

    /// Mean over labelled rows of `−log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[Option<usize>]) -> Result<Var> {
        let lv = self.value(logits);
        let n = lv.last_dim();
        if lv.rows() != labels.len() {
            return Err(Error::shape("cross_entropy", lv.shape(), &[labels.len()]));
        }
        let count = labels.iter().filter(|l| l.is_some()).count();
        if count == 0 {
            return Err(Error::Contract("cross entropy needs at least one labelled position".into()));
        }
        let mut probs = vec![T::ZERO; lv.len()];
        let mut total = 0.0f64;
        for (r, label) in labels.iter().enumerate() {
            let Some(label) = *label else { continue };
            if label >= n {
                return Err(Error::Input(format!("label {label} out of range for {n} classes")));
            }
            let row = &mut probs[r * n..(r + 1) * n];
            row.copy_from_slice(lv.row(r));
            let max = row.iter().copied().fold(row[0], T::max);
            let lse = max.to_f64()
                + row
                    .iter()
                    .map(|&x| (x - max).to_f64().exp())
                    .sum::<f64>()
                    .ln();
            total += lse - row[label].to_f64();
            softmax_row_in_place(row);
        }
        let loss = Tensor::scalar(T::from_f64(total / count as f64));
        let op = Op::CrossEntropy {
            logits,
            labels: labels.to_vec(),
            probs,
            count,
        };
        self.push("cross_entropy", loss, op, &[logits])
    }

    /// Gradients of the scalar `loss` with respect to every node that
    /// requires one.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.recording {
            return Err(Error::Contract("backward called on an inference tape".into()));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::ONE]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            ensure_finite("backward", &g)?;
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| match g {
                Some(g) if self.nodes[i].requires_grad => {
                    Some(Tensor::new(self.nodes[i].value.shape().to_vec(), g).expect("grad shape"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, transpose_b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let k = av.last_dim();
                let m = av.rows();
                let n = node.value.last_dim();
                let gm = MatRef::row_major(g, m, n);
                let bm = MatRef::row_major(bv.data(), bv.shape()[0], bv.shape()[1]);
                // b as the k×n operand actually used in the product
                let b_used = if *transpose_b { bm.t() } else { bm };
                if needs(*a) {
                    let buf = grad_buf(grads, *a, av.len());
                    gemm_into(gm, b_used.t(), buf, true);
                }
                if needs(*b) {
                    let am = MatRef::row_major(av.data(), m, k);
                    let buf = grad_buf(grads, *b, bv.len());
                    if *transpose_b {
                        // d(bᵀ) = aᵀ·g, so db = gᵀ·a
                        gemm_into(gm.t(), am, buf, true);
                    } else {
                        gemm_into(am.t(), gm, buf, true);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if needs(v) {
                        accumulate(grad_buf(grads, v, g.len()), g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if needs(*a) {
                    let buf = grad_buf(grads, *a, g.len());
                    for ((d, &gi), &y) in buf.iter_mut().zip(g).zip(bv) {
                        *d += gi * y;
                    }
                }
                if needs(*b) {
                    let buf = grad_buf(grads, *b, g.len());
                    for ((d, &gi), &x) in buf.iter_mut().zip(g).zip(av) {
                        *d += gi * x;
                    }
                }
            }
            Op::AddBias { x, bias } => {
                if needs(*x) {
                    accumulate(grad_buf(grads, *x, g.len()), g);
                }
                if needs(*bias) {
                    let n = self.value(*bias).len();
                    let buf = grad_buf(grads, *bias, n);
                    for row in g.chunks(n) {
                        accumulate(buf, row);
                    }
                }
            }
            Op::Scale { x, factor } => {
                if needs(*x) {
                    let buf = grad_buf(grads, *x, g.len());
                    for (d, &gi) in buf.iter_mut().zip(g) {
                        *d += gi * *factor;
                    }
                }
            }
            Op::Sum(x) => {
                if needs(*x) {
                    let len = self.value(*x).len();
                    let buf = grad_buf(grads, *x, len);
                    for d in buf.iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Gelu { x, kind } => {
                if needs(*x) {
                    let xv = self.value(*x).data();
                    let buf = grad_buf(grads, *x, g.len());
                    for ((d, &gi), &xi) in buf.iter_mut().zip(g).zip(xv) {
                        *d += gi * gelu_grad_scalar(xi, *kind);
                    }
                }
            }
            Op::Softmax { x, axis } => {
                if needs(*x) {
                    let y = node.value.data();
                    let (outer, n, inner) = tensor::axis_split(node.value.shape(), *axis);
                    let buf = grad_buf(grads, *x, g.len());
                    for o in 0..outer {
                        for j in 0..inner {
                            let idx = |i: usize| (o * n + i) * inner + j;
                            let dot: T = (0..n).map(|i| g[idx(i)] * y[idx(i)]).sum();
                            for i in 0..n {
                                buf[idx(i)] += y[idx(i)] * (g[idx(i)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let h = self.value(*gamma).len();
                let gam = self.value(*gamma).data();
                if needs(*gamma) {
                    let buf = grad_buf(grads, *gamma, h);
                    for (grow, nrow) in g.chunks(h).zip(normalized.chunks(h)) {
                        for c in 0..h {
                            buf[c] += grow[c] * nrow[c];
                        }
                    }
                }
                if needs(*beta) {
                    let buf = grad_buf(grads, *beta, h);
                    for grow in g.chunks(h) {
                        accumulate(buf, grow);
                    }
                }
                if needs(*x) {
                    let hf = T::from_f64(h as f64);
                    let buf = grad_buf(grads, *x, g.len());
                    for (r, (grow, nrow)) in g.chunks(h).zip(normalized.chunks(h)).enumerate() {
                        let mut sum_dxh = T::ZERO;
                        let mut sum_dxh_xh = T::ZERO;
                        for c in 0..h {
                            let dxh = grow[c] * gam[c];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * nrow[c];
                        }
                        let inv = inv_std[r];
                        for c in 0..h {
                            let dxh = grow[c] * gam[c];
                            buf[r * h + c] += inv / hf * (hf * dxh - sum_dxh - nrow[c] * sum_dxh_xh);
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                if needs(*x) {
                    let buf = grad_buf(grads, *x, g.len());
                    for ((d, &gi), &m) in buf.iter_mut().zip(g).zip(mask) {
                        *d += gi * m;
                    }
                }
            }
            Op::Gather { table, ids } => {
                if needs(*table) {
                    let tv = self.value(*table);
                    let n = tv.last_dim();
                    let buf = grad_buf(grads, *table, tv.len());
                    for (r, &id) in ids.iter().enumerate() {
                        accumulate(&mut buf[id * n..(id + 1) * n], &g[r * n..(r + 1) * n]);
                    }
                }
            }
            Op::Attention {
                q,
                k,
                v,
                shape,
                probs,
                dropout,
            } => self.attention_backward(*q, *k, *v, shape, probs, dropout.as_deref(), g, grads),
            Op::CrossEntropy {
                logits,
                labels,
                probs,
                count,
            } => {
                if needs(*logits) {
                    let n = self.value(*logits).last_dim();
                    let scale = g[0] / T::from_f64(*count as f64);
                    let buf = grad_buf(grads, *logits, probs.len());
                    for (r, label) in labels.iter().enumerate() {
                        let Some(label) = *label else { continue };
                        for c in 0..n {
                            buf[r * n + c] += scale * probs[r * n + c];
                        }
                        buf[r * n + label] -= scale;
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        q: Var,
        k: Var,
        v: Var,
        shape: &AttentionShape,
        probs: &[T],
        dropout: Option<&[T]>,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
    ) {
        let (b, t, a) = (shape.batch, shape.seq_len, shape.heads);
        let hidden = self.value(q).last_dim();
        let d = hidden / a;
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        let (qd, kd, vd) = (self.value(q).data(), self.value(k).data(), self.value(v).data());

        let per_head: Vec<[Vec<T>; 3]> = (0..b * a)
            .into_par_iter()
            .map(|bh| {
                let (s, h) = (bh / a, bh % a);
                let view = |data| head_view(data, s, h, t, d, hidden);
                let p = &probs[bh * t * t..(bh + 1) * t * t];
                let used: Vec<T> = match dropout {
                    Some(m) => p.iter().zip(&m[bh * t * t..(bh + 1) * t * t]).map(|(&x, &y)| x * y).collect(),
                    None => p.to_vec(),
                };
                let gview = view(g);
                // dv = usedᵀ · g
                let mut dv = vec![T::ZERO; t * d];
                gemm_into(MatRef::row_major(&used, t, t).t(), gview, &mut dv, false);
                // d(used) = g · vᵀ
                let mut dp = vec![T::ZERO; t * t];
                gemm_into(gview, view(vd).t(), &mut dp, false);
                if let Some(m) = dropout {
                    for (x, &y) in dp.iter_mut().zip(&m[bh * t * t..(bh + 1) * t * t]) {
                        *x *= y;
                    }
                }
                // softmax backward, then fold in the 1/√d scale
                for i in 0..t {
                    let prow = &p[i * t..(i + 1) * t];
                    let drow = &mut dp[i * t..(i + 1) * t];
                    let dot: T = prow.iter().zip(drow.iter()).map(|(&x, &y)| x * y).sum();
                    for j in 0..t {
                        drow[j] = prow[j] * (drow[j] - dot) * scale;
                    }
                }
                let ds = MatRef::row_major(&dp, t, t);
                let mut dq = vec![T::ZERO; t * d];
                gemm_into(ds, view(kd), &mut dq, false);
                let mut dk = vec![T::ZERO; t * d];
                gemm_into(ds.t(), view(qd), &mut dk, false);
                [dq, dk, dv]
            })
            .collect();

        for (slot, var) in [q, k, v].into_iter().enumerate() {
            if !self.nodes[var.0].requires_grad {
                continue;
            }
            let buf = grad_buf(grads, var, b * t * hidden);
            for (bh, parts) in per_head.iter().enumerate() {
                let (s, h) = (bh / a, bh % a);
                let src = &parts[slot];
                for i in 0..t {
                    let dst = (s * t + i) * hidden + h * d;
                    accumulate(&mut buf[dst..dst + d], &src[i * d..(i + 1) * d]);
                }
            }
        }
    }
}

fn head_view<T: Float>(data: &[T], s: usize, h: usize, t: usize, d: usize, hidden: usize) -> MatRef<'_, T> {
    MatRef {
        data,
        offset: s * t * hidden + h * d,
        rows: t,
        cols: d,
        row_stride: hidden,
        col_stride: 1,
    }
}

fn masked_softmax<T: Float>(row: &mut [T], mask: &[bool], scale: T) {
    let mut max: Option<T> = None;
    for (x, &m) in row.iter_mut().zip(mask) {
        if m {
            *x *= scale;
            max = Some(max.map_or(*x, |cur: T| cur.max(*x)));
        }
    }
    let max = max.expect("at least one key");
    let mut sum = T::ZERO;
    for (x, &m) in row.iter_mut().zip(mask) {
        *x = if m { (*x - max).exp() } else { T::ZERO };
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

fn dropout_mask<T: Float, R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.random::<f64>() < p { T::ZERO } else { keep })
        .collect()
}

fn grad_buf<T: Float>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    grads[v.0].get_or_insert_with(|| vec![T::ZERO; len])
}

fn accumulate<T: Float>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients<T: Float = f64> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Float> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros when `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
