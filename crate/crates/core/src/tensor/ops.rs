//! Shape-level operations: broadcasting elementwise arithmetic, matrix
//! product, axis reductions, reshape and channel concatenation.

use super::graph::Backward;
use super::{Graph, Scalar, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EwiseKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

/// Strides that map an index of `a` onto `b`, with zero stride along the
/// broadcast dimensions. `b` is aligned to the trailing dimensions of `a`.
pub(crate) fn broadcast_strides(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let err = || Error::Broadcast {
        a: a.to_vec(),
        b: b.to_vec(),
    };
    if b.len() > a.len() {
        return Err(err());
    }
    let pad = a.len() - b.len();
    let mut strides = vec![0; a.len()];
    let mut acc = 1;
    for d in (0..a.len()).rev() {
        let bd = if d < pad { 1 } else { b[d - pad] };
        if bd == a[d] {
            strides[d] = if bd == 1 { 0 } else { acc };
        } else if bd == 1 {
            strides[d] = 0;
        } else {
            return Err(err());
        }
        acc *= bd;
    }
    Ok(strides)
}

/// Visits every flat index of a tensor of `shape` in row-major order,
/// together with the matching offset under `strides`.
pub(crate) fn for_each_mapped(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let rank = shape.len();
    let inner = shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let outer: usize = shape[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank - 1];
    let mut base = 0usize;
    let mut flat = 0usize;
    for _ in 0..outer {
        let mut off = base;
        for _ in 0..inner {
            f(flat, off);
            flat += 1;
            off += inner_stride;
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            base += strides[d];
            if idx[d] < shape[d] {
                break;
            }
            base -= strides[d] * shape[d];
            idx[d] = 0;
        }
    }
}

struct EwiseOp {
    kind: EwiseKind,
    b_strides: Option<Vec<usize>>,
}

impl<T: Scalar> Backward<T> for EwiseOp {
    fn name(&self) -> &'static str {
        match self.kind {
            EwiseKind::Add => "add",
            EwiseKind::Sub => "sub",
            EwiseKind::Mul => "mul",
        }
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let ga = needs[0].then(|| match self.kind {
            EwiseKind::Add | EwiseKind::Sub => grad.to_vec(),
            EwiseKind::Mul => {
                let mut ga = vec![T::zero(); a.len()];
                match &self.b_strides {
                    None => ga
                        .iter_mut()
                        .zip(grad.iter().zip(b.data()))
                        .for_each(|(o, (&g, &bv))| *o = g * bv),
                    Some(st) => for_each_mapped(a.shape(), st, |ai, bi| ga[ai] = grad[ai] * b.data()[bi]),
                }
                ga
            }
        });
        let gb = needs[1].then(|| {
            let mut gb = vec![T::zero(); b.len()];
            let term = |ai: usize| match self.kind {
                EwiseKind::Add => grad[ai],
                EwiseKind::Sub => -grad[ai],
                EwiseKind::Mul => grad[ai] * a.data()[ai],
            };
            match &self.b_strides {
                None => gb.iter_mut().enumerate().for_each(|(i, o)| *o = term(i)),
                Some(st) => for_each_mapped(a.shape(), st, |ai, bi| gb[bi] = gb[bi] + term(ai)),
            }
            gb
        });
        vec![ga, gb]
    }
}

struct MatMulOp {
    m: usize,
    k: usize,
    n: usize,
}

impl<T: Scalar> Backward<T> for MatMulOp {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (m, k, n) = (self.m, self.k, self.n);
        let ga = needs[0].then(|| {
            let mut ga = vec![T::zero(); m * k];
            T::gemm(m, n, k, grad, false, inputs[1].data(), true, T::zero(), &mut ga);
            ga
        });
        let gb = needs[1].then(|| {
            let mut gb = vec![T::zero(); k * n];
            T::gemm(k, m, n, inputs[0].data(), true, grad, false, T::zero(), &mut gb);
            gb
        });
        vec![ga, gb]
    }
}

struct ReduceOp {
    kind: ReduceKind,
    out_strides: Vec<usize>,
    count: usize,
    argmax: Vec<usize>,
}

impl<T: Scalar> Backward<T> for ReduceOp {
    fn name(&self) -> &'static str {
        match self.kind {
            ReduceKind::Sum => "reduce_sum",
            ReduceKind::Mean => "reduce_mean",
            ReduceKind::Max => "reduce_max",
        }
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], _needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let x = inputs[0];
        let mut gx = vec![T::zero(); x.len()];
        match self.kind {
            ReduceKind::Max => {
                for (oi, &xi) in self.argmax.iter().enumerate() {
                    gx[xi] = gx[xi] + grad[oi];
                }
            }
            ReduceKind::Sum | ReduceKind::Mean => {
                let scale = if self.kind == ReduceKind::Mean {
                    T::one() / T::of(self.count as f64)
                } else {
                    T::one()
                };
                for_each_mapped(x.shape(), &self.out_strides, |xi, oi| gx[xi] = grad[oi] * scale);
            }
        }
        vec![Some(gx)]
    }
}

struct ReshapeOp;

impl<T: Scalar> Backward<T> for ReshapeOp {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        grad: &[T],
        _needs: &[bool],
    ) -> Vec<Option<Vec<T>>> {
        vec![Some(grad.to_vec())]
    }
}

struct ConcatLastOp {
    widths: Vec<usize>,
}

impl<T: Scalar> Backward<T> for ConcatLastOp {
    fn name(&self) -> &'static str {
        "concat"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let total: usize = self.widths.iter().sum();
        let rows = grad.len() / total;
        let mut offset = 0;
        let mut out = Vec::with_capacity(inputs.len());
        for (&w, &need) in self.widths.iter().zip(needs) {
            out.push(need.then(|| {
                let mut g = Vec::with_capacity(rows * w);
                for r in 0..rows {
                    g.extend_from_slice(&grad[r * total + offset..r * total + offset + w]);
                }
                g
            }));
            offset += w;
        }
        out
    }
}

impl<T: Scalar> Graph<T> {
    /// Elementwise `a ∘ b`. `b` may broadcast into `a` through size-1 (or
    /// missing leading) dimensions; the result has `a`'s shape.
    pub fn ewise(&mut self, kind: EwiseKind, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let b_strides = if ta.shape() == tb.shape() {
            None
        } else {
            Some(broadcast_strides(ta.shape(), tb.shape())?)
        };
        let f = |x: T, y: T| match kind {
            EwiseKind::Add => x + y,
            EwiseKind::Sub => x - y,
            EwiseKind::Mul => x * y,
        };
        let mut out = vec![T::zero(); ta.len()];
        match &b_strides {
            None => out
                .iter_mut()
                .zip(ta.data().iter().zip(tb.data()))
                .for_each(|(o, (&x, &y))| *o = f(x, y)),
            Some(st) => for_each_mapped(ta.shape(), st, |ai, bi| out[ai] = f(ta.data()[ai], tb.data()[bi])),
        }
        let value = Tensor::raw(ta.shape().to_vec(), out);
        self.push(value, &[a, b], EwiseOp { kind, b_strides })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ewise(EwiseKind::Mul, a, b)
    }

    /// `[m,k] × [k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::shape(
                format!("[m,k] x [k,n] with {:?} on the left", ta.shape()),
                tb.shape(),
            ));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, ta.data(), false, tb.data(), false, T::zero(), &mut out);
        self.push(Tensor::raw(vec![m, n], out), &[a, b], MatMulOp { m, k, n })
    }

    /// Reduces over `axes`. Reduced axes are dropped unless `keep_dims`;
    /// reducing every axis without `keep_dims` yields shape `[1]`. The max
    /// gradient goes to the first maximiser in row-major order.
    pub fn reduce(&mut self, x: Var, axes: &[usize], kind: ReduceKind, keep_dims: bool) -> Result<Var> {
        let tx = self.value(x);
        let rank = tx.rank();
        let mut reduced = vec![false; rank];
        for &ax in axes {
            if ax >= rank {
                return Err(Error::InvalidAxis { axis: ax, rank });
            }
            reduced[ax] = true;
        }
        let kept: Vec<usize> = (0..rank).map(|d| if reduced[d] { 1 } else { tx.shape()[d] }).collect();
        let out_len: usize = kept.iter().product();
        let mut out_strides = vec![0; rank];
        let mut acc = 1;
        for d in (0..rank).rev() {
            if !reduced[d] {
                out_strides[d] = acc;
                acc *= kept[d];
            }
        }
        let count = tx.len() / out_len;

        let mut out = vec![T::zero(); out_len];
        let mut argmax = Vec::new();
        match kind {
            ReduceKind::Sum | ReduceKind::Mean => {
                for_each_mapped(tx.shape(), &out_strides, |xi, oi| out[oi] = out[oi] + tx.data()[xi]);
                if kind == ReduceKind::Mean {
                    let c = T::of(count as f64);
                    out.iter_mut().for_each(|v| *v = *v / c);
                }
            }
            ReduceKind::Max => {
                argmax = vec![usize::MAX; out_len];
                for_each_mapped(tx.shape(), &out_strides, |xi, oi| {
                    let v = tx.data()[xi];
                    if argmax[oi] == usize::MAX || v > out[oi] {
                        out[oi] = v;
                        argmax[oi] = xi;
                    }
                });
            }
        }

        let shape = if keep_dims {
            kept
        } else {
            let s: Vec<usize> = (0..rank).filter(|&d| !reduced[d]).map(|d| tx.shape()[d]).collect();
            if s.is_empty() {
                vec![1]
            } else {
                s
            }
        };
        let op = ReduceOp {
            kind,
            out_strides,
            count,
            argmax,
        };
        self.push(Tensor::raw(shape, out), &[x], op)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        self.push(Tensor::raw(t.shape().to_vec(), t.into_data()), &[x], ReshapeOp)
    }

    /// Concatenates along the last axis; all leading dimensions must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]).shape().to_vec();
        let lead = &first[..first.len() - 1];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len() || &s[..s.len() - 1] != lead {
                return Err(Error::SpatialMismatch {
                    a: first.clone(),
                    b: s.to_vec(),
                });
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        self.push(Tensor::raw(shape, out), parts, ConcatLastOp { widths })
    }
}
