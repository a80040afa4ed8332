//! Reverse-mode automatic differentiation over an explicit tape.
//!
//! Every op appends a node holding its forward value; node ids are
//! therefore topologically ordered by creation and the tape is acyclic.
//! `backward` walks the nodes in reverse, accumulating gradients additively
//! into every node that requires them, so shared subexpressions receive the
//! sum of all paths.

use crate::scalar::Real;
use crate::tensor::{ConvGeometry, Result, Tensor, TensorError};

/// Arccos inputs are clamped to this distance from ±1 when differentiating.
pub const ARCCOS_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Conv2d {
        x: Var,
        k: Var,
        stride: usize,
        pad: usize,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var),
    MulScalar(Var, T),
    PowScalar(Var, T),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    L2Normalize {
        x: Var,
        eps: T,
    },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Arccos(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    Gather {
        x: Var,
        index: Vec<usize>,
    },
    TakeRows {
        x: Var,
        rows: Vec<usize>,
    },
    Transpose(Var),
    Reshape(Var),
    Concat(Vec<Var>),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2 { .. } => "max_pool2",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::PowScalar(..) => "pow_scalar",
            Op::Relu(..) => "relu",
            Op::Softmax(..) => "softmax",
            Op::LogSoftmax(..) => "log_softmax",
            Op::L2Normalize { .. } => "l2_normalize",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumRows(..) => "sum_rows",
            Op::Arccos(..) => "arccos",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Gather { .. } => "gather",
            Op::TakeRows { .. } => "take_rows",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::Concat(..) => "concat",
        }
    }

    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Conv2d { x, k, .. } => vec![*x, *k],
            Op::Concat(vs) => vs.clone(),
            Op::MaxPool2 { x, .. }
            | Op::L2Normalize { x, .. }
            | Op::Gather { x, .. }
            | Op::TakeRows { x, .. } => vec![*x],
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::PowScalar(a, _)
            | Op::Relu(a)
            | Op::Softmax(a)
            | Op::LogSoftmax(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumRows(a)
            | Op::Arccos(a)
            | Op::Cos(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Transpose(a)
            | Op::Reshape(a) => vec![*a],
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A single-context gradient tape.
#[derive(Debug, Clone, Default)]
pub struct Tape<T = f64> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes and gradients.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.grads.clear();
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, false)
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

    /// Gradient accumulated by the last `backward`, if `v` received one.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn push_raw(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: op.name() });
        }
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push_raw(value, op, requires_grad))
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Result<Var> {
        let value = self.value(a).map(f);
        self.push(value, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(value, Op::MatMul(a, b))
    }

    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, pad: usize) -> Result<Var> {
        let value = self.value(x).conv2d(self.value(k), stride, pad)?;
        self.push(value, Op::Conv2d { x, k, stride, pad })
    }

    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let (value, argmax) = self.value(x).max_pool2_with_indices()?;
        self.push(value, Op::MaxPool2 { x, argmax })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        self.push(value, Op::Mul(a, b))
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Result<Var> {
        self.unary(a, Op::AddScalar(a), |x| x + s)
    }

    pub fn mul_scalar(&mut self, a: Var, s: T) -> Result<Var> {
        self.unary(a, Op::MulScalar(a, s), |x| x * s)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.mul_scalar(a, -T::one())
    }

    /// Elementwise `x^p`. The derivative at `x = 0` is taken as 0 when `p < 1`.
    pub fn pow_scalar(&mut self, a: Var, p: T) -> Result<Var> {
        self.unary(a, Op::PowScalar(a, p), |x| x.powf(p))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu(a), |x| x.max(T::zero()))
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).softmax();
        self.push(value, Op::Softmax(a))
    }

    /// Row-wise log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).log_softmax();
        self.push(value, Op::LogSoftmax(a))
    }

    pub fn l2_normalize(&mut self, a: Var, eps: T) -> Result<Var> {
        if eps <= T::zero() {
            return Err(TensorError::InvalidArgument {
                op: "l2_normalize",
                detail: "eps must be positive".into(),
            });
        }
        let value = self.value(a).l2_normalize(eps);
        self.push(value, Op::L2Normalize { x: a, eps })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::scalar(t.sum() / T::lit(t.len() as f64));
        self.push(value, Op::Mean(a))
    }

    /// Sums over the last axis: `[..., C] -> [...]` (rank-1 input gives `[1]`).
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let c = t.row_len();
        let sums: Vec<T> = t.data().chunks(c).map(|r| r.iter().copied().sum()).collect();
        let shape = if t.ndim() == 1 {
            vec![1]
        } else {
            t.shape()[..t.ndim() - 1].to_vec()
        };
        self.push(Tensor::from_parts(shape, sums), Op::SumRows(a))
    }

    /// `acos` of inputs clamped to [-1, 1]; see [`ARCCOS_CLAMP`] for the derivative.
    pub fn arccos(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Arccos(a), |x| x.max(-T::one()).min(T::one()).acos())
    }

    pub fn cos(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Cos(a), |x| x.cos())
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Log(a), |x| x.ln())
    }

    /// Picks flat elements `x[index[i]]` into a rank-1 tensor.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if index.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "gather",
                detail: "empty index".into(),
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= t.len()) {
            return Err(TensorError::IndexOutOfRange {
                op: "gather",
                index: bad,
                extent: t.len(),
            });
        }
        let data = index.iter().map(|&i| t.data()[i]).collect();
        let value = Tensor::from_parts(vec![index.len()], data);
        self.push(
            value,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        )
    }

    /// Picks `x[i, row[i]]` from an `[N, C]` matrix.
    pub fn gather_rows(&mut self, x: Var, cols: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 || cols.len() != shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "gather_rows",
                detail: format!("{shape:?} with {} indices", cols.len()),
            });
        }
        let c = shape[1];
        if let Some(&bad) = cols.iter().find(|&&j| j >= c) {
            return Err(TensorError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                extent: c,
            });
        }
        let flat: Vec<usize> = cols.iter().enumerate().map(|(i, &j)| i * c + j).collect();
        self.gather(x, &flat)
    }

    /// Selects whole rows of an `[N, ...]` tensor (repeats allowed).
    pub fn take_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let n = t.shape()[0];
        if rows.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "take_rows",
                detail: "empty row list".into(),
            });
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(TensorError::IndexOutOfRange {
                op: "take_rows",
                index: bad,
                extent: n,
            });
        }
        let stride = t.len() / n;
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            data.extend_from_slice(&t.data()[r * stride..(r + 1) * stride]);
        }
        let mut shape = t.shape().to_vec();
        shape[0] = rows.len();
        let value = Tensor::from_parts(shape, data);
        self.push(
            value,
            Op::TakeRows {
                x,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose()?;
        self.push(value, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        self.push(value, Op::Reshape(a))
    }

    /// Concatenates the flattened inputs into one rank-1 tensor.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let data: Vec<T> = parts
            .iter()
            .flat_map(|&p| self.value(p).data().iter().copied())
            .collect();
        let value = Tensor::from_parts(vec![data.len()], data);
        self.push(value, Op::Concat(parts.to_vec()))
    }

    /// Adds a bias vector `[C]` to every row of `[N, C]`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = self.shape(x)[0];
        let c = self.value(bias).len();
        let ones = self.constant(Tensor::ones(&[n, 1]));
        let b = self.reshape(bias, &[1, c])?;
        let tiled = self.matmul(ones, b)?;
        self.add(x, tiled)
    }

    /// Computes gradients of the scalar `root` with respect to every node
    /// that requires them.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let root_node = self.nodes.get(root.0).ok_or(TensorError::DetachedRoot)?;
        if root_node.value.len() != 1 {
            return Err(TensorError::NotScalar {
                len: root_node.value.len(),
            });
        }
        if !root_node.requires_grad {
            return Err(TensorError::DetachedRoot);
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(Tensor::ones(root_node.value.shape()));

        for id in (0..=root.0).rev() {
            let Some(dy) = self.grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if !node.requires_grad {
                self.grads[id] = Some(dy);
                continue;
            }
            let contributions = self.vjp(id, &dy)?;
            for (parent, g) in contributions {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                match &mut self.grads[parent.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += *b;
                        }
                    }
                    slot @ None => *slot = Some(g),
                }
            }
            self.grads[id] = Some(dy);
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `id` for upstream gradient `dy`.
    fn vjp(&self, id: usize, dy: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>> {
        let node = &self.nodes[id];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let same = |v: Var, data: Vec<T>| Tensor::from_parts(val(v).shape().to_vec(), data);
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let da = dy.matmul(&val(*b).transpose()?)?;
                let db = val(*a).transpose()?.matmul(dy)?;
                vec![(*a, da), (*b, db)]
            }
            Op::Conv2d { x, k, stride, pad } => {
                let (xv, kv) = (val(*x), val(*k));
                let geom = ConvGeometry::new(xv.shape(), kv.shape(), *stride, *pad)?;
                let mut dx = vec![T::zero(); xv.len()];
                let mut dk = vec![T::zero(); kv.len()];
                geom.backward(xv.data(), kv.data(), dy.data(), Some(&mut dx), Some(&mut dk));
                vec![(*x, same(*x, dx)), (*k, same(*k, dk))]
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = vec![T::zero(); val(*x).len()];
                for (&src, &g) in argmax.iter().zip(dy.data()) {
                    dx[src] += g;
                }
                vec![(*x, same(*x, dx))]
            }
            Op::Add(a, b) => vec![(*a, dy.clone()), (*b, dy.clone())],
            Op::Sub(a, b) => vec![(*a, dy.clone()), (*b, dy.map(|g| -g))],
            Op::Mul(a, b) => {
                let da = dy.zip_map(val(*b), "mul", |g, bv| g * bv)?;
                let db = dy.zip_map(val(*a), "mul", |g, av| g * av)?;
                vec![(*a, da), (*b, db)]
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                vec![(*a, same(*a, dy.data().to_vec()))]
            }
            Op::MulScalar(a, s) => vec![(*a, dy.map(|g| g * *s))],
            Op::PowScalar(a, p) => {
                let p = *p;
                let da = dy.zip_map(val(*a), "pow_scalar", |g, x| {
                    if x == T::zero() && p < T::one() {
                        T::zero()
                    } else {
                        g * p * x.powf(p - T::one())
                    }
                })?;
                vec![(*a, da)]
            }
            Op::Relu(a) => {
                let da = dy.zip_map(val(*a), "relu", |g, x| if x > T::zero() { g } else { T::zero() })?;
                vec![(*a, da)]
            }
            Op::Softmax(a) => {
                let c = y.row_len();
                let mut da = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks(c).zip(dy.data().chunks(c)) {
                    let dot: T = yr.iter().zip(gr).map(|(&p, &g)| p * g).sum();
                    da.extend(yr.iter().zip(gr).map(|(&p, &g)| p * (g - dot)));
                }
                vec![(*a, same(*a, da))]
            }
            Op::LogSoftmax(a) => {
                let c = y.row_len();
                let mut da = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks(c).zip(dy.data().chunks(c)) {
                    let total: T = gr.iter().copied().sum();
                    da.extend(yr.iter().zip(gr).map(|(&l, &g)| g - l.exp() * total));
                }
                vec![(*a, same(*a, da))]
            }
            Op::L2Normalize { x, eps } => {
                let xv = val(*x);
                let d = xv.row_len();
                let mut dx = Vec::with_capacity(xv.len());
                for ((xr, yr), gr) in xv
                    .data()
                    .chunks(d)
                    .zip(y.data().chunks(d))
                    .zip(dy.data().chunks(d))
                {
                    let norm = xr.iter().map(|&v| v * v).sum::<T>().sqrt();
                    if norm >= *eps {
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        dx.extend(yr.iter().zip(gr).map(|(&yv, &g)| (g - yv * dot) / norm));
                    } else {
                        dx.extend(gr.iter().map(|&g| g / *eps));
                    }
                }
                vec![(*x, same(*x, dx))]
            }
            Op::Sum(a) => {
                let g = dy.data()[0];
                vec![(*a, Tensor::full(val(*a).shape(), g))]
            }
            Op::Mean(a) => {
                let n = T::lit(val(*a).len() as f64);
                let g = dy.data()[0] / n;
                vec![(*a, Tensor::full(val(*a).shape(), g))]
            }
            Op::SumRows(a) => {
                let c = val(*a).row_len();
                let da: Vec<T> = dy
                    .data()
                    .iter()
                    .flat_map(|&g| std::iter::repeat_n(g, c))
                    .collect();
                vec![(*a, same(*a, da))]
            }
            Op::Arccos(a) => {
                let lim = T::one() - T::lit(ARCCOS_CLAMP);
                let da = dy.zip_map(val(*a), "arccos", |g, x| {
                    let xc = x.max(-lim).min(lim);
                    -g / (T::one() - xc * xc).sqrt()
                })?;
                vec![(*a, da)]
            }
            Op::Cos(a) => vec![(*a, dy.zip_map(val(*a), "cos", |g, x| -g * x.sin())?)],
            Op::Exp(a) => vec![(*a, dy.zip_map(y, "exp", |g, e| g * e)?)],
            Op::Log(a) => vec![(*a, dy.zip_map(val(*a), "log", |g, x| g / x)?)],
            Op::Gather { x, index } => {
                let mut dx = vec![T::zero(); val(*x).len()];
                for (&i, &g) in index.iter().zip(dy.data()) {
                    dx[i] += g;
                }
                vec![(*x, same(*x, dx))]
            }
            Op::TakeRows { x, rows } => {
                let xv = val(*x);
                let stride = xv.len() / xv.shape()[0];
                let mut dx = vec![T::zero(); xv.len()];
                for (k, &r) in rows.iter().enumerate() {
                    let src = &dy.data()[k * stride..(k + 1) * stride];
                    for (d, &g) in dx[r * stride..(r + 1) * stride].iter_mut().zip(src) {
                        *d += g;
                    }
                }
                vec![(*x, same(*x, dx))]
            }
            Op::Transpose(a) => vec![(*a, dy.transpose()?)],
            Op::Concat(parts) => {
                let mut offset = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let n = val(p).len();
                        let g = same(p, dy.data()[offset..offset + n].to_vec());
                        offset += n;
                        (p, g)
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut tape: Tape = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![2, 3], &[1., -2., 3., 0.5, 0., 7.]).unwrap());
        let s = tape.sum(x).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.; 6]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape: Tape = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![3], &[1., 2., 3.]).unwrap());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2., 4., 6.]);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::ones(&[2]));
        assert_eq!(tape.backward(x), Err(TensorError::NotScalar { len: 2 }));
        let c = tape.constant(Tensor::ones(&[3]));
        let s = tape.sum(c).unwrap();
        assert_eq!(tape.backward(s), Err(TensorError::DetachedRoot));
    }

    #[test]
    fn log_of_zero_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[1]));
        assert_eq!(tape.log(x), Err(TensorError::NonFinite { op: "log" }));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape: Tape = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![2], &[1., 2.]).unwrap());
        let c = tape.constant(Tensor::from_f64(vec![2], &[3., 4.]).unwrap());
        let p = tape.mul(x, c).unwrap();
        let s = tape.sum(p).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[3., 4.]);
        assert!(tape.grad(c).is_none());
    }
}
