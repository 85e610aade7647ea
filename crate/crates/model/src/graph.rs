//! A tape-based reverse-mode autodiff graph over 2-D tensors.
//!
//! Each forward pass builds a fresh [`Graph`] borrowing the parameter store; values are
//! computed eagerly as nodes are appended and [`Graph::backward`] walks the tape once.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{Element, Tensor};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulConst(Var, Tensor<T>),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, T, T),
    LayerNorm { a: Var, inv_std: Vec<T> },
    MaxPoolRows { a: Var, argmax: Vec<usize> },
    Softmax(Var),
    LogSoftmax { a: Var, mask: Option<Vec<bool>> },
    LogSumExp(Var),
    SliceCols { a: Var, start: usize },
    ConcatCols(Vec<Var>),
    Pick { a: Var, at: Vec<(usize, usize)> },
    SumAll(Var),
    SumCols(Var),
}

enum Value<T> {
    Owned(Tensor<T>),
    Param(ParamId),
}

struct Node<T> {
    value: Value<T>,
    op: Op<T>,
}

pub struct Graph<'p, T> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<Var>>,
    dropout: Option<(T, ChaCha8Rng)>,
}

impl<'p, T: Element> Graph<'p, T> {
    /// Graph in inference mode (dropout disabled).
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: vec![None; params.len()], dropout: None }
    }

    /// Graph in training mode with the given dropout rate.
    pub fn training(params: &'p ParamStore<T>, dropout: T, rng: ChaCha8Rng) -> Self {
        let mut g = Self::new(params);
        if dropout > T::zero() {
            g.dropout = Some((dropout, rng));
        }
        g
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node { value: Value::Param(id), op: Op::Param(id) });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shape mismatch");
        Tensor::from_vec(x.rows, x.cols, x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect())
    }

    fn unary(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        self.value(a).map(f)
    }

    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let out = self.value(a).matmul(ta, self.value(b), tb);
        self.push(out, Op::MatMul { a, b, ta, tb })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, true)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |p, q| p + q);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |p, q| p - q);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |p, q| p * q);
        self.push(out, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |p, q| p / q);
        self.push(out, Op::Div(a, b))
    }

    fn broadcast_row(&self, a: Var, row: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!((r.rows, r.cols), (1, x.cols), "row broadcast shape mismatch");
        let mut out = x.clone();
        for i in 0..x.rows {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&r.data) {
                *o = f(*o, b);
            }
        }
        out
    }

    /// Add a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let out = self.broadcast_row(a, row, |p, q| p + q);
        self.push(out, Op::AddRow(a, row))
    }

    /// Multiply every row of `a` elementwise by a `1×c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let out = self.broadcast_row(a, row, |p, q| p * q);
        self.push(out, Op::MulRow(a, row))
    }

    /// Elementwise product with a non-differentiable tensor (masks, dropout).
    pub fn mul_const(&mut self, a: Var, c: Tensor<T>) -> Var {
        let x = self.value(a);
        assert_eq!(x.shape(), c.shape(), "mul_const shape mismatch");
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().zip(&c.data).map(|(&p, &q)| p * q).collect());
        self.push(out, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.unary(a, |v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let out = self.unary(a, |v| v + s);
        self.push(out, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.unary(a, |v| v.max(T::zero()));
        self.push(out, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.unary(a, softplus);
        self.push(out, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.unary(a, T::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.unary(a, T::ln);
        self.push(out, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let out = self.unary(a, |v| v.max(lo).min(hi));
        self.push(out, Op::Clamp(a, lo, hi))
    }

    /// Row-wise standardization (no affine part).
    pub fn layer_norm(&mut self, a: Var, eps: T) -> Var {
        let x = self.value(a);
        let n = T::of(x.cols as f64);
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let row = out.row_mut(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let s = T::one() / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * s;
            }
            inv_std.push(s);
        }
        self.push(out, Op::LayerNorm { a, inv_std })
    }

    /// Column-wise maximum over the rows selected by `mask` (all rows when `None`).
    pub fn max_pool_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Var {
        let x = self.value(a);
        let keep = |r: usize| mask.is_none_or(|m| m[r]);
        assert!((0..x.rows).any(keep), "max pool over an empty row set");
        let mut out = Tensor::zeros(1, x.cols);
        let mut argmax = vec![0; x.cols];
        for c in 0..x.cols {
            let mut best: Option<(usize, T)> = None;
            for r in (0..x.rows).filter(|&r| keep(r)) {
                let v = x.get(r, c);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
            let (r, v) = best.expect("non-empty row set");
            argmax[c] = r;
            out.data[c] = v;
        }
        self.push(out, Op::MaxPoolRows { a, argmax })
    }

    /// Row-wise softmax; columns with `mask[c] == false` get probability exactly zero.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Var {
        let out = softmax(self.value(a), mask);
        self.push(out, Op::Softmax(a))
    }

    /// Row-wise log-softmax; masked columns hold negative infinity and receive no gradient.
    pub fn log_softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..x.rows {
            let lse = logsumexp(x.row(r), mask);
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if mask.is_none_or(|m| m[c]) { *v - lse } else { T::neg_infinity() };
            }
        }
        self.push(out, Op::LogSoftmax { a, mask: mask.map(<[bool]>::to_vec) })
    }

    /// Per-row log-sum-exp, producing a column vector.
    pub fn logsumexp_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, 1, (0..x.rows).map(|r| logsumexp(x.row(r), None)).collect());
        self.push(out, Op::LogSumExp(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols, "column slice out of range");
        let mut out = Tensor::zeros(x.rows, len);
        for r in 0..x.rows {
            out.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { a, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let x = self.value(p);
            assert_eq!(x.rows, rows, "concat row mismatch");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + x.cols].copy_from_slice(x.row(r));
            }
            offset += x.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Gather the listed `(row, col)` entries into an `n×1` column.
    pub fn pick(&mut self, a: Var, at: Vec<(usize, usize)>) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(at.len(), 1, at.iter().map(|&(r, c)| x.get(r, c)).collect());
        self.push(out, Op::Pick { a, at })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::SumAll(a))
    }

    /// Per-row sum, producing a column vector.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, 1, (0..x.rows).map(|r| x.row(r).iter().copied().sum()).collect());
        self.push(out, Op::SumCols(a))
    }

    /// Inverted dropout in training mode; identity otherwise.
    pub fn dropout(&mut self, a: Var) -> Var {
        let Some((rate, rng)) = self.dropout.as_mut() else { return a };
        let rate = *rate;
        let keep = T::one() - rate;
        let (rows, cols) = match &self.nodes[a.0].value {
            Value::Owned(t) => t.shape(),
            Value::Param(id) => self.params.get(*id).shape(),
        };
        let p = rate.as_f64();
        let mask = (0..rows * cols).map(|_| if rng.random::<f64>() < p { T::zero() } else { T::one() / keep }).collect();
        self.mul_const(a, Tensor::from_vec(rows, cols, mask))
    }

    /// Reverse pass from a `1×1` node; returns gradients for every parameter in the store.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.shape(root), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(T::one()));
        let mut out = Gradients::zeros_like(self.params);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let y = self.value(Var(i));
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => out.tensors[id.0].add_assign(&g),
                Op::MatMul { a, b, ta, tb } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let da = match (*ta, *tb) {
                        (false, false) => g.matmul(false, bv, true),
                        (false, true) => g.matmul(false, bv, false),
                        (true, false) => bv.matmul(false, &g, true),
                        (true, true) => bv.matmul(true, &g, true),
                    };
                    let db = match (*ta, *tb) {
                        (false, false) => av.matmul(true, &g, false),
                        (true, false) => av.matmul(false, &g, false),
                        (false, true) => g.matmul(true, av, false),
                        (true, true) => g.matmul(true, av, true),
                    };
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = hadamard(&g, self.value(*b));
                    let db = hadamard(&g, self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let da = Tensor::from_vec(g.rows, g.cols, g.data.iter().zip(&bv.data).map(|(&d, &q)| d / q).collect());
                    // d(a/b)/db = -y/b
                    let db = Tensor::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&y.data).zip(&bv.data).map(|((&d, &yy), &q)| -d * yy / q).collect(),
                    );
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, column_sums(&g));
                    acc(&mut grads, *a, g);
                }
                Op::MulRow(a, row) => {
                    let (av, rv) = (self.value(*a), self.value(*row));
                    let mut da = g.clone();
                    let mut dr = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            da.data[r * g.cols + c] = g.get(r, c) * rv.data[c];
                            dr.data[c] += g.get(r, c) * av.get(r, c);
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *row, dr);
                }
                Op::MulConst(a, c) => acc(&mut grads, *a, hadamard(&g, c)),
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|v| v * *s)),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |d, v| if v > T::zero() { d } else { T::zero() }));
                }
                Op::Softplus(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |d, v| d * sigmoid(v)));
                }
                Op::Exp(a) => acc(&mut grads, *a, hadamard(&g, y)),
                Op::Log(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |d, v| d / v));
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |d, v| if v > *lo && v < *hi { d } else { T::zero() }));
                }
                Op::LayerNorm { a, inv_std } => {
                    let n = T::of(g.cols as f64);
                    let mut dx = Tensor::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let (gr, yr) = (g.row(r), y.row(r));
                        let mean_g = gr.iter().copied().sum::<T>() / n;
                        let mean_gy = gr.iter().zip(yr).map(|(&p, &q)| p * q).sum::<T>() / n;
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] * (gr[c] - mean_g - yr[c] * mean_gy);
                        }
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::MaxPoolRows { a, argmax } => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Tensor::zeros(rows, cols);
                    for (c, &r) in argmax.iter().enumerate() {
                        dx.data[r * cols + c] += g.data[c];
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::Softmax(a) => {
                    let mut dx = Tensor::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let (gr, yr) = (g.row(r), y.row(r));
                        let dot = gr.iter().zip(yr).map(|(&p, &q)| p * q).sum::<T>();
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = yr[c] * (gr[c] - dot);
                        }
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::LogSoftmax { a, mask } => {
                    let mut dx = Tensor::zeros(g.rows, g.cols);
                    let live = |c: usize| mask.as_ref().is_none_or(|m| m[c]);
                    for r in 0..g.rows {
                        let (gr, yr) = (g.row(r), y.row(r));
                        let total = (0..g.cols).filter(|&c| live(c)).map(|c| gr[c]).sum::<T>();
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            if live(c) {
                                *o = gr[c] - yr[c].exp() * total;
                            }
                        }
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::LogSumExp(a) => {
                    let x = self.value(*a);
                    let mut dx = Tensor::zeros(x.rows, x.cols);
                    for r in 0..x.rows {
                        let lse = y.data[r];
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = g.data[r] * (x.get(r, c) - lse).exp();
                        }
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::SliceCols { a, start } => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        dx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.shape(p).1;
                        let mut dx = Tensor::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            dx.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        acc(&mut grads, p, dx);
                    }
                }
                Op::Pick { a, at } => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Tensor::zeros(rows, cols);
                    for (k, &(r, c)) in at.iter().enumerate() {
                        dx.data[r * cols + c] += g.data[k];
                    }
                    acc(&mut grads, *a, dx);
                }
                Op::SumAll(a) => {
                    let (rows, cols) = self.shape(*a);
                    acc(&mut grads, *a, Tensor::filled(rows, cols, g.data[0]));
                }
                Op::SumCols(a) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        dx.row_mut(r).fill(g.data[r]);
                    }
                    acc(&mut grads, *a, dx);
                }
            }
        }
        out
    }
}

fn acc<T: Element>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn hadamard<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    zip_map(a, b, |p, q| p * q)
}

fn zip_map<T: Element>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(&p, &q)| f(p, q)).collect())
}

fn column_sums<T: Element>(g: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(1, g.cols);
    for r in 0..g.rows {
        for (o, &v) in out.data.iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

pub fn softplus<T: Element>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Element>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn logsumexp<T: Element>(row: &[T], mask: Option<&[bool]>) -> T {
    let live = |c: usize| mask.is_none_or(|m| m[c]);
    let max = (0..row.len()).filter(|&c| live(c)).map(|c| row[c]).fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + (0..row.len()).filter(|&c| live(c)).map(|c| (row[c] - max).exp()).sum::<T>().ln()
}

pub fn softmax<T: Element>(x: &Tensor<T>, mask: Option<&[bool]>) -> Tensor<T> {
    let mut out = x.clone();
    for r in 0..x.rows {
        let lse = logsumexp(x.row(r), mask);
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = if mask.is_none_or(|m| m[c]) { (*v - lse).exp() } else { T::zero() };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Central-difference check of d(f)/d(param) for every scalar of every parameter.
    fn check(store: &mut ParamStore<f64>, f: impl Fn(&mut Graph<'_, f64>) -> Var) {
        let analytic = {
            let mut g = Graph::new(store);
            let root = f(&mut g);
            g.backward(root)
        };
        let eps = 1e-6;
        for p in 0..store.len() {
            for k in 0..store.entries()[p].value.len() {
                let orig = store.entries()[p].value.data[k];
                let eval = |v: f64, store: &mut ParamStore<f64>| {
                    store.entries_mut()[p].value.data[k] = v;
                    let mut g = Graph::new(store);
                    let root = f(&mut g);
                    g.value(root).data[0]
                };
                let numeric = (eval(orig + eps, store) - eval(orig - eps, store)) / (2.0 * eps);
                store.entries_mut()[p].value.data[k] = orig;
                let a = analytic.tensors[p].data[k];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                assert!(err < 1e-6, "param {p}[{k}]: analytic {a} numeric {numeric}");
            }
        }
    }

    fn store(shapes: &[(usize, usize)]) -> ParamStore<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        for (i, &(r, c)) in shapes.iter().enumerate() {
            let data = (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect();
            s.add(format!("p{i}"), Tensor::from_vec(r, c, data), true);
        }
        s
    }

    #[test]
    fn matmul_variants() {
        let mut s = store(&[(3, 4), (4, 2), (2, 4)]);
        check(&mut s, |g| {
            let (a, b, c) = (g.param(ParamId(0)), g.param(ParamId(1)), g.param(ParamId(2)));
            let ab = g.matmul(a, b); // 3x2
            let x = g.matmul_t(a, false, c, true); // 3x2
            let y = g.matmul_t(ab, true, x, false); // 2x2
            let z = g.matmul_t(c, true, y, true); // 4x2
            let w = g.matmul_nt(z, b); // 4x4
            let sq = g.square(w);
            g.sum(sq)
        });
    }

    #[test]
    fn elementwise_and_reductions() {
        let mut s = store(&[(3, 4), (3, 4), (1, 4)]);
        check(&mut s, |g| {
            let (a, b, r) = (g.param(ParamId(0)), g.param(ParamId(1)), g.param(ParamId(2)));
            let sp = g.softplus(b);
            let q = g.div(a, sp);
            let m = g.mul_row(q, r);
            let n = g.add_row(m, r);
            let ln = g.layer_norm(n, 1e-5);
            let e = g.exp(ln);
            let l = g.log(sp);
            let t = g.sub(e, l);
            let rl = g.relu(t);
            let pooled = g.max_pool_rows(rl, Some(&[true, false, true]));
            let lse = g.logsumexp_rows(t);
            let s1 = g.sum(pooled);
            let s2 = g.sum(lse);
            let tot = g.add(s1, s2);
            g.scale(tot, 0.5)
        });
    }

    #[test]
    fn softmax_family_slices_and_picks() {
        let mut s = store(&[(2, 5), (2, 3)]);
        check(&mut s, |g| {
            let (a, b) = (g.param(ParamId(0)), g.param(ParamId(1)));
            let cat = g.concat_cols(&[a, b]);
            let sl = g.slice_cols(cat, 2, 5);
            let mask = [true, false, true, true, true];
            let sm = g.softmax_rows(sl, Some(&mask));
            let ls = g.log_softmax_rows(sl, Some(&mask));
            let picked = g.pick(ls, vec![(0, 0), (1, 4), (1, 2)]);
            let w = g.constant(Tensor::from_f64(2, 5, &[1.0, 2.0, 3.0, 4.0, 5.0, -1.0, 0.5, 2.0, 1.0, 0.0]));
            let weighted = g.mul(sm, w);
            let rowsum = g.sum_cols(weighted);
            let c = g.clamp(rowsum, -10.0, 10.0);
            let s1 = g.sum(c);
            let s2 = g.sum(picked);
            g.add(s1, s2)
        });
    }

    #[test]
    fn masked_softmax_is_exactly_zero() {
        let s = store(&[(1, 4)]);
        let mut g = Graph::new(&s);
        let a = g.param(ParamId(0));
        let p = g.softmax_rows(a, Some(&[true, false, true, false]));
        let v = g.value(p);
        assert_eq!(v.data[1], 0.0);
        assert_eq!(v.data[3], 0.0);
        assert!((v.data[0] + v.data[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dropout_only_in_training() {
        let s = store(&[(4, 4)]);
        let mut g = Graph::new(&s);
        let a = g.param(ParamId(0));
        assert_eq!(g.dropout(a), a);
        let mut t = Graph::training(&s, 0.5, ChaCha8Rng::seed_from_u64(0));
        let a = t.param(ParamId(0));
        let d = t.dropout(a);
        assert_ne!(d, a);
        let zeros = t.value(d).data.iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 0 && zeros < 16);
    }
}
