//! Define-by-run reverse-mode tape.
//!
//! Every forward op appends a node holding its value; [`Tape::backward`] walks the
//! nodes in reverse creation order. Node ids strictly increase, so inputs always
//! precede their consumers and the tape is acyclic by construction.

use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, ConvGeom};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Softplus switches to the identity above this input.
pub const SOFTPLUS_LINEAR_ABOVE: f64 = 30.0;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Matmul(Var, Var),
    AddBias(Var, Var),
    Concat(Vec<Var>),
    SumN(Vec<Var>),
    Slice { x: Var, start: usize, len: usize },
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Square(Var),
    Sqrt(Var),
    LeakyRelu(Var, f64),
    L2Norm(Var),
    Conv2d { x: Var, k: Var, b: Var, stride: usize, pad: usize },
    Upsample2(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul_elem",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::Matmul(..) => "matmul",
            Op::AddBias(..) => "add_bias",
            Op::Concat(..) => "concat",
            Op::SumN(..) => "sum_n",
            Op::Slice { .. } => "slice",
            Op::Reshape(..) => "reshape",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Square(..) => "square",
            Op::Sqrt(..) => "sqrt",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::L2Norm(..) => "l2_norm",
            Op::Conv2d { .. } => "conv2d",
            Op::Upsample2(..) => "upsample2",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LINEAR_ABOVE {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn last_dim(t: &Tensor) -> usize {
    t.shape().last().copied().unwrap_or(1)
}

fn add_into(dst: &mut Option<Vec<f64>>, len: usize, f: impl FnOnce(&mut [f64])) {
    let buf = dst.get_or_insert_with(|| vec![0.0; len]);
    f(buf);
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

    /// Every node handle in creation order.
    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.nodes.len()).map(Var)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Operation tag of a node, e.g. `"matmul"`.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    /// The stored parameter a node was read from, if any.
    pub fn param_of(&self, v: Var) -> Option<ParamId> {
        match self.nodes[v.0].op {
            Op::Param(id) => Some(id),
            _ => None,
        }
    }

    /// Ids of the nodes a node was computed from.
    pub fn inputs(&self, v: Var) -> Vec<Var> {
        match &self.nodes[v.0].op {
            Op::Leaf | Op::Param(_) => Vec::new(),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::Matmul(a, b) | Op::AddBias(a, b) => {
                vec![*a, *b]
            }
            Op::Concat(xs) | Op::SumN(xs) => xs.clone(),
            Op::Conv2d { x, k, b, .. } => vec![*x, *k, *b],
            Op::Scale(a, _)
            | Op::Shift(a)
            | Op::Slice { x: a, .. }
            | Op::Reshape(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Square(a)
            | Op::Sqrt(a)
            | Op::LeakyRelu(a, _)
            | Op::L2Norm(a)
            | Op::Upsample2(a) => vec![*a],
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input that gradients can be read back for but that is not a parameter.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.push(Op::Leaf, t)
    }

    /// Records (once per tape) the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(Some(v)) = self.param_vars.get(id.0) {
            return *v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: store.value(id).clone(),
        });
        let v = Var(self.nodes.len() - 1);
        if self.param_vars.len() <= id.0 {
            self.param_vars.resize(id.0 + 1, None);
        }
        self.param_vars[id.0] = Some(v);
        v
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let value = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if tb.len() == 1 {
            let y = tb.item();
            let data = ta.data().iter().map(|&x| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if ta.len() == 1 {
            let x = ta.item();
            let data = tb.data().iter().map(|&y| f(x, y)).collect();
            Tensor::new(tb.shape().to_vec(), data)?
        } else {
            return Err(shape_err(op.name(), ta, tb));
        };
        self.push(op, value)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(op, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::Shift(a), |x| x + c)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), libm::exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Log(a), libm::log)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a), libm::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sqrt(a), libm::sqrt)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let s = libm::sqrt(self.value(a).data().iter().map(|x| x * x).sum());
        self.push(Op::L2Norm(a), Tensor::scalar(s))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul(ta.data(), tb.data(), m, k, n, &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        self.push(Op::Matmul(a, b), value)
    }

    /// Adds a `[n]` bias to every row of a `[.., n]` tensor.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let n = last_dim(tx);
        if tb.len() != n {
            return Err(shape_err("add_bias", tx, tb));
        }
        let bias = tb.data();
        let data = tx
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bias).map(|(r, b)| r + b))
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        self.push(Op::AddBias(x, b), value)
    }

    /// Concatenates along the last axis; all leading dimensions must agree.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| crate::error::invalid("concat of zero tensors"))?;
        let t0 = self.value(*first);
        let lead = &t0.shape()[..t0.shape().len().saturating_sub(1)];
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(xs.len());
        for &v in xs {
            let t = self.value(v);
            if t.shape().len() != t0.shape().len() || &t.shape()[..t.shape().len() - 1] != lead {
                return Err(shape_err("concat", t0, t));
            }
            widths.push(last_dim(t));
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&v, &w) in xs.iter().zip(&widths) {
                data.extend_from_slice(&self.value(v).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let value = Tensor::new(shape, data)?;
        self.push(Op::Concat(xs.to_vec()), value)
    }

    /// Elementwise sum of equally shaped tensors. Each coordinate is summed in
    /// ascending value order, so the result is bit-identical under any
    /// permutation of `xs`.
    pub fn sum_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| crate::error::invalid("sum_n of zero tensors"))?;
        let t0 = self.value(*first);
        for &v in xs {
            if self.value(v).shape() != t0.shape() {
                return Err(shape_err("sum_n", t0, self.value(v)));
            }
        }
        let mut column = Vec::with_capacity(xs.len());
        let data = (0..t0.len())
            .map(|j| {
                column.clear();
                column.extend(xs.iter().map(|&v| self.value(v).data()[j]));
                column.sort_by(f64::total_cmp);
                column.iter().sum()
            })
            .collect();
        let value = Tensor::new(t0.shape().to_vec(), data)?;
        self.push(Op::SumN(xs.to_vec()), value)
    }

    /// Takes `len` entries starting at `start` along the last axis.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let w = last_dim(t);
        if len == 0 || start + len > w {
            return Err(Error::Shape {
                op: "slice",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let data = t.data().chunks(w).flat_map(|row| row[start..start + len].iter().copied()).collect();
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = Tensor::new(shape, data)?;
        self.push(Op::Slice { x, start, len }, value)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        self.push(Op::Reshape(x), value)
    }

    /// Single-example convolution: `x [C,H,W]`, `k [O,C,KH,KW]`, `b [O]` -> `[O,Ho,Wo]`.
    pub fn conv2d(&mut self, x: Var, k: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let g = self.conv_geom(x, k, b, stride, pad)?;
        let mut out = vec![0.0; g.c_out * g.ho * g.wo];
        kernels::conv2d_forward(&g, self.value(x).data(), self.value(k).data(), self.value(b).data(), &mut out);
        let value = Tensor::new(vec![g.c_out, g.ho, g.wo], out)?;
        self.push(Op::Conv2d { x, k, b, stride, pad }, value)
    }

    fn conv_geom(&self, x: Var, k: Var, b: Var, stride: usize, pad: usize) -> Result<ConvGeom> {
        let (tx, tk, tb) = (self.value(x), self.value(k), self.value(b));
        let (sx, sk) = (tx.shape(), tk.shape());
        if sx.len() != 3 || sk.len() != 4 || sk[1] != sx[0] || tb.len() != sk[0] || stride == 0 {
            return Err(shape_err("conv2d", tx, tk));
        }
        let (h, w, kh, kw) = (sx[1], sx[2], sk[2], sk[3]);
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(shape_err("conv2d", tx, tk));
        }
        Ok(ConvGeom {
            c_in: sx[0],
            h,
            w,
            c_out: sk[0],
            kh,
            kw,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (w + 2 * pad - kw) / stride + 1,
        })
    }

    /// Nearest-neighbour 2x upsampling of `[C,H,W]`.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.shape();
        if s.len() != 3 {
            return Err(Error::Shape {
                op: "upsample2",
                lhs: s.to_vec(),
                rhs: vec![3],
            });
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let mut out = vec![0.0; c * 4 * h * w];
        let src = t.data();
        for ci in 0..c {
            for y in 0..2 * h {
                let srow = &src[(ci * h + y / 2) * w..(ci * h + y / 2 + 1) * w];
                let orow = &mut out[(ci * 2 * h + y) * 2 * w..(ci * 2 * h + y + 1) * 2 * w];
                for (xo, o) in orow.iter_mut().enumerate() {
                    *o = srow[xo / 2];
                }
            }
        }
        let value = Tensor::new(vec![c, 2 * h, 2 * w], out)?;
        self.push(Op::Upsample2(x), value)
    }

    /// Reverse sweep from a scalar root. Gradients of every node reachable from the
    /// root are returned; nothing is written to any store.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: rv.shape().to_vec(),
                rhs: Vec::new(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let params = self
            .param_vars
            .iter()
            .enumerate()
            .filter_map(|(p, v)| v.map(|v| (ParamId(p), v)))
            .filter(|(_, v)| v.0 <= root.0)
            .collect();
        Ok(Gradients { grads, params })
    }

    /// Runs [`Tape::backward`] and adds the parameter gradients into `store`.
    pub fn backward_into(&self, root: Var, store: &mut ParamStore) -> Result<()> {
        self.backward(root)?.accumulate_into(store)
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = node.value.data();
        let len_of = |v: Var| self.nodes[v.0].value.len();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                self.broadcast_back(*a, g, grads, |_, gi| gi);
                self.broadcast_back(*b, g, grads, move |_, gi| sign * gi);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let at = |t: &Tensor, j: usize| if t.len() == 1 { t.item() } else { t.data()[j] };
                self.broadcast_back(*a, g, grads, |j, gi| gi * at(vb, j));
                self.broadcast_back(*b, g, grads, |j, gi| gi * at(va, j));
            }
            Op::Div(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let at = |t: &Tensor, j: usize| if t.len() == 1 { t.item() } else { t.data()[j] };
                self.broadcast_back(*a, g, grads, |j, gi| gi / at(vb, j));
                self.broadcast_back(*b, g, grads, |j, gi| {
                    let y = at(vb, j);
                    -gi * at(va, j) / (y * y)
                });
            }
            Op::Scale(a, c) => add_into(&mut grads[a.0], g.len(), |d| {
                d.iter_mut().zip(g).for_each(|(d, gi)| *d += c * gi)
            }),
            Op::Shift(a) | Op::Reshape(a) => add_into(&mut grads[a.0], g.len(), |d| {
                d.iter_mut().zip(g).for_each(|(d, gi)| *d += gi)
            }),
            Op::Sum(a) => add_into(&mut grads[a.0], len_of(*a), |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Mean(a) => {
                let n = len_of(*a);
                add_into(&mut grads[a.0], n, |d| d.iter_mut().for_each(|d| *d += g[0] / n as f64))
            }
            Op::L2Norm(a) => {
                let x = self.nodes[a.0].value.data();
                let norm = val[0];
                add_into(&mut grads[a.0], x.len(), |d| {
                    // subgradient 0 at the origin
                    if norm > 0.0 {
                        d.iter_mut().zip(x).for_each(|(d, xi)| *d += g[0] * xi / norm)
                    }
                })
            }
            Op::Exp(a) => self.elementwise_back(*a, g, grads, |_, y| y, val),
            Op::Log(a) => self.elementwise_back(*a, g, grads, |x, _| 1.0 / x, val),
            Op::Tanh(a) => self.elementwise_back(*a, g, grads, |_, y| 1.0 - y * y, val),
            Op::Sigmoid(a) => self.elementwise_back(*a, g, grads, |_, y| y * (1.0 - y), val),
            Op::Softplus(a) => self.elementwise_back(
                *a,
                g,
                grads,
                |x, _| if x > SOFTPLUS_LINEAR_ABOVE { 1.0 } else { sigmoid(x) },
                val,
            ),
            Op::Square(a) => self.elementwise_back(*a, g, grads, |x, _| 2.0 * x, val),
            Op::Sqrt(a) => self.elementwise_back(*a, g, grads, |_, y| 0.5 / y, val),
            Op::LeakyRelu(a, s) => {
                let s = *s;
                self.elementwise_back(*a, g, grads, move |x, _| if x > 0.0 { 1.0 } else { s }, val)
            }
            Op::Matmul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let (da, db) = (ta.data(), tb.data());
                add_into(&mut grads[a.0], m * k, |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &db[p * n..(p + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                add_into(&mut grads[b.0], k * n, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = da[i * k + p];
                            let gbrow = &mut gb[p * n..(p + 1) * n];
                            gbrow.iter_mut().zip(grow).for_each(|(d, gi)| *d += aip * gi);
                        }
                    }
                });
            }
            Op::AddBias(x, b) => {
                add_into(&mut grads[x.0], g.len(), |d| d.iter_mut().zip(g).for_each(|(d, gi)| *d += gi));
                let n = len_of(*b);
                add_into(&mut grads[b.0], n, |d| {
                    for row in g.chunks(n) {
                        d.iter_mut().zip(row).for_each(|(d, gi)| *d += gi);
                    }
                });
            }
            Op::Concat(xs) => {
                let widths: Vec<usize> = xs.iter().map(|v| last_dim(&self.nodes[v.0].value)).collect();
                let total: usize = widths.iter().sum();
                let rows = g.len() / total;
                let mut off = 0;
                for (v, &w) in xs.iter().zip(&widths) {
                    add_into(&mut grads[v.0], rows * w, |d| {
                        for r in 0..rows {
                            let src = &g[r * total + off..r * total + off + w];
                            d[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(d, s)| *d += s);
                        }
                    });
                    off += w;
                }
            }
            Op::SumN(xs) => {
                for v in xs {
                    add_into(&mut grads[v.0], g.len(), |d| d.iter_mut().zip(g).for_each(|(d, gi)| *d += gi));
                }
            }
            Op::Slice { x, start, len } => {
                let w = last_dim(&self.nodes[x.0].value);
                let n = len_of(*x);
                add_into(&mut grads[x.0], n, |d| {
                    for (r, grow) in g.chunks(*len).enumerate() {
                        d[r * w + start..r * w + start + len]
                            .iter_mut()
                            .zip(grow)
                            .for_each(|(d, s)| *d += s);
                    }
                });
            }
            Op::Conv2d { x, k, b, stride, pad } => {
                let geom = self.conv_geom(*x, *k, *b, *stride, *pad).expect("validated in forward");
                let (nx, nk, nb) = (len_of(*x), len_of(*k), len_of(*b));
                let mut gx = grads[x.0].take().unwrap_or_else(|| vec![0.0; nx]);
                let mut gk = grads[k.0].take().unwrap_or_else(|| vec![0.0; nk]);
                let mut gb = grads[b.0].take().unwrap_or_else(|| vec![0.0; nb]);
                kernels::conv2d_backward(
                    &geom,
                    self.nodes[x.0].value.data(),
                    self.nodes[k.0].value.data(),
                    g,
                    &mut gx,
                    &mut gk,
                    &mut gb,
                );
                grads[x.0] = Some(gx);
                grads[k.0] = Some(gk);
                grads[b.0] = Some(gb);
            }
            Op::Upsample2(x) => {
                let s = self.nodes[x.0].value.shape();
                let (c, h, w) = (s[0], s[1], s[2]);
                add_into(&mut grads[x.0], c * h * w, |d| {
                    for ci in 0..c {
                        for y in 0..2 * h {
                            let grow = &g[(ci * 2 * h + y) * 2 * w..(ci * 2 * h + y + 1) * 2 * w];
                            let drow = &mut d[(ci * h + y / 2) * w..(ci * h + y / 2 + 1) * w];
                            for (xo, gi) in grow.iter().enumerate() {
                                drow[xo / 2] += gi;
                            }
                        }
                    }
                });
            }
        }
    }

    /// Elementwise local derivative `f(x, y)` where `y` is the op output.
    fn elementwise_back(
        &self,
        a: Var,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        f: impl Fn(f64, f64) -> f64,
        out: &[f64],
    ) {
        let x = self.nodes[a.0].value.data();
        add_into(&mut grads[a.0], x.len(), |d| {
            for ((d, (&xi, &yi)), gi) in d.iter_mut().zip(x.iter().zip(out)).zip(g) {
                *d += gi * f(xi, yi);
            }
        });
    }

    /// Routes an elementwise gradient to an operand that may have been scalar-broadcast.
    fn broadcast_back(&self, a: Var, g: &[f64], grads: &mut [Option<Vec<f64>>], f: impl Fn(usize, f64) -> f64) {
        let n = self.nodes[a.0].value.len();
        add_into(&mut grads[a.0], n, |d| {
            if n == g.len() {
                for (j, (d, &gi)) in d.iter_mut().zip(g).enumerate() {
                    *d += f(j, gi);
                }
            } else {
                d[0] += g.iter().enumerate().map(|(j, &gi)| f(j, gi)).sum::<f64>();
            }
        });
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient of the root with respect to any node (zero if unreachable).
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        for (id, g) in self.param_grads() {
            store.accumulate_grad(id, g)?;
        }
        Ok(())
    }

    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params
            .iter()
            .filter_map(|(id, v)| self.grads[v.0].as_deref().map(|g| (*id, g)))
    }

    /// Detaches the parameter gradients, dropping intermediate buffers.
    pub fn into_param_grads(mut self) -> ParamGrads {
        let mut out: Vec<(ParamId, Vec<f64>)> = self
            .params
            .iter()
            .filter_map(|(id, v)| self.grads[v.0].take().map(|g| (*id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        ParamGrads(out)
    }
}

/// Parameter gradients of one example, sorted by parameter id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrads(pub Vec<(ParamId, Vec<f64>)>);

impl ParamGrads {
    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        for (id, g) in &self.0 {
            store.accumulate_grad(*id, g)?;
        }
        Ok(())
    }
}
