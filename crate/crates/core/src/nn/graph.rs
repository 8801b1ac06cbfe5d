//! Tape-based reverse-mode differentiation over row-major matrices.
//!
//! A [`Graph`] records every operation applied to its variables. Calling
//! [`Graph::backward`] on a `[1, 1]` loss walks the tape in reverse and
//! returns the gradient of the loss with respect to every recorded node and
//! every parameter that took part in the computation.

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Value<T> {
    Owned(Tensor<T>),
    Param(ParamId),
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleBy(Var, Var),
    Scale(Var, T),
    Affine(Var, Vec<T>),
    ConstMul(Var, Tensor<T>),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Ln(Var),
    Clamp(Var, T, T),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        shift: Var,
        xhat: Tensor<T>,
        inv_std: Vec<T>,
    },
    FeatureAttention {
        q: Var,
        k: Var,
        v: Var,
        weights: Vec<T>,
    },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Mean(Var),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor<T>,
    },
    Mse(Var, Tensor<T>),
    BceWithLogits(Var, Vec<T>),
}

struct Node<T> {
    value: Value<T>,
    op: Op<T>,
}

pub struct Graph<'p, T> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

/// Result of a backward pass.
pub struct Gradients<T> {
    nodes: Vec<Option<Tensor<T>>>,
    params: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to an input created by [`Graph::input`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].as_ref()
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(id.0).and_then(Option::as_ref)
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row-wise softmax of a `[rows, cols]` tensor, stabilised by max subtraction.
pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let cols = x.cols();
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(cols) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Softmax of a single logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant or input; gradients with respect to it are still reported.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols(), bv.rows(), "matmul inner dimensions");
        let out = matmul(av, bv);
        self.push(out, Op::MatMul(a, b))
    }

    /// Adds a `[1, m]` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(bias));
        assert_eq!(bv.len(), xv.cols(), "bias width");
        let mut out = xv.clone();
        let cols = out.cols();
        for row in out.data_mut().chunks_mut(cols) {
            for (o, &b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddBias(x, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b))
    }

    /// Multiplies `x` by the single value held in the `[1, 1]` variable `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let sv = self.value(s);
        assert_eq!(sv.len(), 1, "scale_by needs a scalar");
        let k = sv.data()[0];
        let out = self.value(x).map(|v| v * k);
        self.push(out, Op::ScaleBy(x, s))
    }

    pub fn scale(&mut self, x: Var, k: T) -> Var {
        let out = self.value(x).map(|v| v * k);
        self.push(out, Op::Scale(x, k))
    }

    /// Per-column `x * scale + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: &[T], shift: &[T]) -> Var {
        let xv = self.value(x);
        let cols = xv.cols();
        assert!(scale.len() == cols && shift.len() == cols, "affine width");
        let mut out = xv.clone();
        for row in out.data_mut().chunks_mut(cols) {
            for c in 0..cols {
                row[c] = row[c] * scale[c] + shift[c];
            }
        }
        self.push(out, Op::Affine(x, scale.to_vec()))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn const_mul(&mut self, x: Var, k: Tensor<T>) -> Var {
        let out = self.value(x).zip_map(&k, |a, b| a * b);
        self.push(out, Op::ConstMul(x, k))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(T::zero()));
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.tanh());
        self.push(out, Op::Tanh(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.ln());
        self.push(out, Op::Ln(x))
    }

    /// Clamps into `[lo, hi]`; the gradient passes only where the input lies inside.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        let out = self.value(x).map(|v| v.max(lo).min(hi));
        self.push(out, Op::Clamp(x, lo, hi))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let out = softmax_rows(self.value(x));
        self.push(out, Op::Softmax(x))
    }

    /// Row-wise normalisation followed by a per-feature gain and shift (`[1, f]` each).
    pub fn layer_norm(&mut self, x: Var, gain: Var, shift: Var, eps: T) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let n = T::from_usize(cols).unwrap();
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(rows);
        for row in xhat.data_mut().chunks_mut(cols) {
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
        let (g, b) = (self.value(gain), self.value(shift));
        assert!(g.len() == cols && b.len() == cols, "layer norm width");
        let mut out = xhat.clone();
        for row in out.data_mut().chunks_mut(cols) {
            for ((v, &gc), &bc) in row.iter_mut().zip(g.data()).zip(b.data()) {
                *v = *v * gc + bc;
            }
        }
        debug_assert_eq!(inv_std.len(), rows);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                shift,
                xhat,
                inv_std,
            },
        )
    }

    /// Attention across the feature axis of each row.
    ///
    /// For a row with per-feature queries `q`, keys `k` and values `v`, the
    /// output at feature `i` is `sum_j softmax_j(q_i * k_j) * v_j`.
    pub fn feature_attention(&mut self, q: Var, k: Var, v: Var) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (rows, f) = (qv.rows(), qv.cols());
        assert!(
            kv.shape() == qv.shape() && vv.shape() == qv.shape(),
            "attention shapes"
        );
        let mut weights = vec![T::zero(); rows * f * f];
        let mut out = vec![T::zero(); rows * f];
        for r in 0..rows {
            let (qr, kr, vr) = (qv.row_slice(r), kv.row_slice(r), vv.row_slice(r));
            for i in 0..f {
                let w = &mut weights[(r * f + i) * f..(r * f + i + 1) * f];
                for j in 0..f {
                    w[j] = qr[i] * kr[j];
                }
                softmax_in_place(w);
                out[r * f + i] = w.iter().zip(vr).map(|(&a, &b)| a * b).sum();
            }
        }
        let out = Tensor::new(vec![rows, f], out).unwrap();
        self.push(out, Op::FeatureAttention { q, k, v, weights })
    }

    /// Attention weights recorded by a [`Graph::feature_attention`] node, `[rows * f * f]`.
    pub fn attention_weights(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::FeatureAttention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat rows");
                out.extend_from_slice(pv.row_slice(r));
            }
        }
        let out = Tensor::new(vec![rows, total], out).unwrap();
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        assert!(start + len <= xv.cols(), "slice out of range");
        let rows = xv.rows();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&xv.row_slice(r)[start..start + len]);
        }
        let out = Tensor::new(vec![rows, len], out).unwrap();
        self.push(out, Op::SliceCols(x, start))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.sum() / T::from_usize(xv.len()).unwrap();
        self.push(Tensor::scalar(m), Op::Mean(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean negative log-softmax of each row's target class.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        let (rows, cols) = (lv.rows(), lv.cols());
        assert_eq!(rows, targets.len(), "one target per row");
        assert!(targets.iter().all(|&t| t < cols), "target out of range");
        let probs = softmax_rows(lv);
        let mut loss = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row_slice(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            loss += lse - row[t];
        }
        loss /= T::from_usize(rows).unwrap();
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: Tensor<T>) -> Var {
        let pv = self.value(pred);
        assert_eq!(pv.shape(), target.shape(), "mse shapes");
        let n = T::from_usize(pv.len()).unwrap();
        let loss = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum::<T>()
            / n;
        self.push(Tensor::scalar(loss), Op::Mse(pred, target))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against targets in `[0, 1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[T]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.len(), targets.len(), "one target per logit");
        let n = T::from_usize(lv.len()).unwrap();
        // -[y ln s(z) + (1-y) ln(1-s(z))] = softplus(z) - y z
        let loss = lv
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<T>()
            / n;
        self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits(logits, targets.to_vec()),
        )
    }

    /// Reverse pass from a `[1, 1]` node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Tensor<T>>> = (0..self.params.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let out = match &node.value {
                Value::Owned(t) => t,
                Value::Param(id) => self.params.value(*id),
            };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::Param(id) => {
                    accumulate(&mut params[id.0], g.clone());
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads[a.0], matmul_nt(&g, bv));
                    accumulate(&mut grads[b.0], matmul_tn(av, &g));
                }
                Op::AddBias(x, b) => {
                    let cols = g.cols();
                    let mut gb = vec![T::zero(); cols];
                    for row in g.data().chunks(cols) {
                        for (acc, &v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    let shape = self.value(*b).shape().to_vec();
                    accumulate(&mut grads[b.0], Tensor::new(shape, gb).unwrap());
                    accumulate(&mut grads[x.0], g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[b.0], g.map(|v| -v));
                    accumulate(&mut grads[a.0], g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads[a.0], g.zip_map(bv, |x, y| x * y));
                    accumulate(&mut grads[b.0], g.zip_map(av, |x, y| x * y));
                }
                Op::ScaleBy(x, s) => {
                    let k = self.value(*s).data()[0];
                    let xv = self.value(*x);
                    let gs: T = g.data().iter().zip(xv.data()).map(|(&a, &b)| a * b).sum();
                    let shape = self.value(*s).shape().to_vec();
                    accumulate(&mut grads[s.0], Tensor::new(shape, vec![gs]).unwrap());
                    accumulate(&mut grads[x.0], g.map(|v| v * k));
                }
                Op::Scale(x, k) => {
                    let k = *k;
                    accumulate(&mut grads[x.0], g.map(|v| v * k));
                }
                Op::Affine(x, scale) => {
                    let cols = g.cols();
                    let mut gx = g;
                    for row in gx.data_mut().chunks_mut(cols) {
                        for c in 0..cols {
                            row[c] *= scale[c];
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConstMul(x, k) => {
                    accumulate(&mut grads[x.0], g.zip_map(k, |a, b| a * b));
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let gx = g.zip_map(xv, |gv, v| if v > T::zero() { gv } else { T::zero() });
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sigmoid(x) => {
                    let gx = g.zip_map(out, |gv, s| gv * s * (T::one() - s));
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Tanh(x) => {
                    let gx = g.zip_map(out, |gv, t| gv * (T::one() - t * t));
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Ln(x) => {
                    let gx = g.zip_map(self.value(*x), |gv, v| gv / v);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Clamp(x, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let gx = g.zip_map(self.value(*x), |gv, v| {
                        if v >= lo && v <= hi {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Softmax(x) => {
                    let cols = out.cols();
                    let mut gx = g.clone();
                    for (grow, prow) in gx.data_mut().chunks_mut(cols).zip(out.data().chunks(cols))
                    {
                        let dot: T = grow.iter().zip(prow).map(|(&a, &b)| a * b).sum();
                        for (gv, &p) in grow.iter_mut().zip(prow) {
                            *gv = p * (*gv - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    shift,
                    xhat,
                    inv_std,
                } => {
                    let cols = xhat.cols();
                    let n = T::from_usize(cols).unwrap();
                    let gv = self.value(*gain);
                    let mut dgain = vec![T::zero(); cols];
                    let mut dshift = vec![T::zero(); cols];
                    let mut gx = vec![T::zero(); g.len()];
                    for (r, (grow, hrow)) in g
                        .data()
                        .chunks(cols)
                        .zip(xhat.data().chunks(cols))
                        .enumerate()
                    {
                        let mut sum_dh = T::zero();
                        let mut sum_dh_h = T::zero();
                        for c in 0..cols {
                            dgain[c] += grow[c] * hrow[c];
                            dshift[c] += grow[c];
                            let dh = grow[c] * gv.data()[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hrow[c];
                        }
                        let is = inv_std[r];
                        for c in 0..cols {
                            let dh = grow[c] * gv.data()[c];
                            gx[r * cols + c] = is / n * (n * dh - sum_dh - hrow[c] * sum_dh_h);
                        }
                    }
                    let gshape = self.value(*gain).shape().to_vec();
                    let sshape = self.value(*shift).shape().to_vec();
                    accumulate(&mut grads[gain.0], Tensor::new(gshape, dgain).unwrap());
                    accumulate(&mut grads[shift.0], Tensor::new(sshape, dshift).unwrap());
                    accumulate(
                        &mut grads[x.0],
                        Tensor::new(g.shape().to_vec(), gx).unwrap(),
                    );
                }
                Op::FeatureAttention { q, k, v, weights } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let (rows, f) = (qv.rows(), qv.cols());
                    let mut gq = vec![T::zero(); rows * f];
                    let mut gk = vec![T::zero(); rows * f];
                    let mut gvv = vec![T::zero(); rows * f];
                    for r in 0..rows {
                        let (qr, kr, vr) = (qv.row_slice(r), kv.row_slice(r), vv.row_slice(r));
                        let orow = out.row_slice(r);
                        let grow = g.row_slice(r);
                        for i in 0..f {
                            let w = &weights[(r * f + i) * f..(r * f + i + 1) * f];
                            let go = grow[i];
                            for j in 0..f {
                                gvv[r * f + j] += w[j] * go;
                                // d score_ij = w_ij * go * (v_j - o_i)
                                let ds = w[j] * go * (vr[j] - orow[i]);
                                gq[r * f + i] += ds * kr[j];
                                gk[r * f + j] += ds * qr[i];
                            }
                        }
                    }
                    let shape = qv.shape().to_vec();
                    accumulate(&mut grads[q.0], Tensor::new(shape.clone(), gq).unwrap());
                    accumulate(&mut grads[k.0], Tensor::new(shape.clone(), gk).unwrap());
                    accumulate(&mut grads[v.0], Tensor::new(shape, gvv).unwrap());
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.value(*p).cols();
                        let mut gp = Vec::with_capacity(rows * pc);
                        for r in 0..rows {
                            gp.extend_from_slice(
                                &g.data()[r * total + offset..r * total + offset + pc],
                            );
                        }
                        accumulate(&mut grads[p.0], Tensor::new(vec![rows, pc], gp).unwrap());
                        offset += pc;
                    }
                }
                Op::SliceCols(x, start) => {
                    let xv = self.value(*x);
                    let (rows, cols) = (xv.rows(), xv.cols());
                    let len = g.cols();
                    let mut gx = vec![T::zero(); rows * cols];
                    for r in 0..rows {
                        gx[r * cols + start..r * cols + start + len]
                            .copy_from_slice(g.row_slice(r));
                    }
                    accumulate(
                        &mut grads[x.0],
                        Tensor::new(xv.shape().to_vec(), gx).unwrap(),
                    );
                }
                Op::Mean(x) => {
                    let xv = self.value(*x);
                    let k = g.data()[0] / T::from_usize(xv.len()).unwrap();
                    accumulate(&mut grads[x.0], Tensor::full(xv.shape(), k));
                }
                Op::Sum(x) => {
                    let xv = self.value(*x);
                    accumulate(&mut grads[x.0], Tensor::full(xv.shape(), g.data()[0]));
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let rows = probs.rows();
                    let cols = probs.cols();
                    let k = g.data()[0] / T::from_usize(rows).unwrap();
                    let mut gx = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        gx.data_mut()[r * cols + t] -= T::one();
                    }
                    gx.data_mut().iter_mut().for_each(|v| *v *= k);
                    accumulate(&mut grads[logits.0], gx);
                }
                Op::Mse(pred, target) => {
                    let pv = self.value(*pred);
                    let k = g.data()[0] * T::lit(2.0) / T::from_usize(pv.len()).unwrap();
                    accumulate(&mut grads[pred.0], pv.zip_map(target, |p, t| k * (p - t)));
                }
                Op::BceWithLogits(logits, targets) => {
                    let lv = self.value(*logits);
                    let k = g.data()[0] / T::from_usize(lv.len()).unwrap();
                    let data = lv
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&z, &y)| k * (sigmoid(z) - y))
                        .collect();
                    accumulate(
                        &mut grads[logits.0],
                        Tensor::new(lv.shape().to_vec(), data).unwrap(),
                    );
                }
            }
        }
        Gradients {
            nodes: grads,
            params,
        }
    }
}
