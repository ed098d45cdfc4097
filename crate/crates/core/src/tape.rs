//! Reverse-mode differentiation over tensor operations.
//!
//! A [`Tape`] records every operation applied during a forward pass as a
//! node holding its output value. [`Tape::gradients`] then walks the nodes in
//! exact reverse order of application, propagating adjoints to inputs and
//! trainable [`Parameter`]s.
//!
//! ```
//! use dan_core::{ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::<f64>::new();
//! let p = store.add("p", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()).unwrap();
//! let mut tape = Tape::new();
//! let v = tape.param(&store, p);
//! let sq = tape.square(v).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! tape.backward(loss, &mut store).unwrap();
//! assert_eq!(store.get(p).grad.data(), &[2.0, -4.0, 1.0]);
//! ```

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{self, ConvGeom, ConvSpec, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    has_grad: bool,
}

impl<T: Scalar> Parameter<T> {
    /// True once a backward pass has written into `grad` since the last
    /// [`ParamStore::zero_grad`].
    pub fn has_grad(&self) -> bool {
        self.has_grad
    }
}

/// Named parameters, addressed by [`ParamId`] in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T = f32> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.find(&name).is_some() {
            return Err(Error::contract(alloc::format!("duplicate parameter name {name}")));
        }
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name,
            value,
            grad,
            has_grad: false,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar weights.
    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
            p.has_grad = false;
        }
    }

    /// Multiplies every accumulated gradient by `s`.
    pub fn scale_grads(&mut self, s: T) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }

    /// Same parameters in another precision; gradients are reset.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: Tensor::zeros(p.value.shape()),
                    has_grad: false,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param,
    MatMul(Var, Var),
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine {
        x: Var,
        scale: f64,
    },
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Gather {
        x: Var,
        idx: Vec<usize>,
    },
    GroupScores {
        f: Var,
        g: Var,
        scale: f64,
    },
    SoftmaxCols(Var),
    GroupMix {
        h: Var,
        a: Var,
    },
    Concat(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
}

/// Record of operations sufficient to replay adjoints.
#[derive(Clone, Debug, Default)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

/// Adjoints of the leaves of a tape with respect to one scalar.
#[derive(Clone, Debug)]
pub struct Gradients<T = f32> {
    leaves: Vec<Option<Tensor<T>>>,
    params: Vec<(ParamId, Var)>,
    visited: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for an input or parameter node, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(v.0).and_then(|g| g.as_ref())
    }

    /// Node indices in the order their adjoints were propagated.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }

    /// Adds parameter gradients into `store` and marks them populated.
    pub fn write_params(&self, store: &mut ParamStore<T>) {
        for &(id, var) in &self.params {
            let p = store.get_mut(id);
            if let Some(g) = self.wrt(var) {
                for (dst, &src) in p.grad.data_mut().iter_mut().zip(g.data()) {
                    *dst += src;
                }
            }
            p.has_grad = true;
        }
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_vars: Vec::new(),
        }
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

    fn push(&mut self, value: Tensor<T>, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::Numeric { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf holding `value`; its gradient is kept when `requires_grad` is set.
    pub fn input(&mut self, value: Tensor<T>, requires_grad: bool) -> Result<Var> {
        self.push(value, Op::Input, requires_grad, "input")
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.input(value, false)
    }

    /// Leaf bound to a stored parameter. Repeated calls for the same id
    /// return the same node, so shared weights accumulate one gradient.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(Some(v)) = self.param_vars.get(id.0) {
            return *v;
        }
        let value = store.get(id).value.clone();
        self.nodes.push(Node {
            value,
            op: Op::Param,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        if self.param_vars.len() <= id.0 {
            self.param_vars.resize(id.0 + 1, None);
        }
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg, "matmul")
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let out = tensor::conv2d_ext(self.value(x), self.value(w), b.map(|b| self.value(b)), spec)?;
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        self.push(out, Op::Conv { x, w, b, spec }, rg, "conv2d")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg, "mul")
    }

    /// `scale * x + shift`, element-wise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let (s, c) = (T::from_f64(scale), T::from_f64(shift));
        let out = self.value(x).map(|v| s * v + c);
        let rg = self.rg(x);
        self.push(out, Op::Affine { x, scale }, rg, "affine")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.affine(x, s, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(T::zero()));
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg, "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        let rg = self.rg(x);
        self.push(out, Op::Sigmoid(x), rg, "sigmoid")
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.abs());
        let rg = self.rg(x);
        self.push(out, Op::Abs(x), rg, "abs")
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v * v);
        let rg = self.rg(x);
        self.push(out, Op::Square(x), rg, "square")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg, "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let out = Tensor::scalar(t.sum() / T::from_f64(t.len() as f64));
        let rg = self.rg(x);
        self.push(out, Op::Mean(x), rg, "mean")
    }

    /// Column gather on a matrix: output column `j` is input column `idx[j]`.
    pub fn gather_cols(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let (r, n) = xv.dims2("gather_cols")?;
        if idx.iter().any(|&i| i >= n) {
            return Err(Error::dim("gather_cols", xv.shape(), &[idx.len()]));
        }
        let m = idx.len();
        let mut out = Tensor::zeros(&[r, m]);
        let src = xv.data();
        for (orow, irow) in out.data_mut().chunks_exact_mut(m).zip(src.chunks_exact(n)) {
            for (o, &i) in orow.iter_mut().zip(idx) {
                *o = irow[i];
            }
        }
        let rg = self.rg(x);
        self.push(out, Op::Gather { x, idx: idx.to_vec() }, rg, "gather_cols")
    }

    /// Per-group affinity logits. With `f, g: [d, parts·q]` the output is
    /// `[parts, q, q]` where entry `(p, i, j)` is
    /// `scale · Σ_c f[c, p·q+i] · g[c, p·q+j]`.
    pub fn group_scores(&mut self, f: Var, g: Var, parts: usize, scale: f64) -> Result<Var> {
        let (fv, gv) = (self.value(f), self.value(g));
        if fv.shape() != gv.shape() {
            return Err(Error::dim("group_scores", fv.shape(), gv.shape()));
        }
        let (d, n) = fv.dims2("group_scores")?;
        if parts == 0 || n % parts != 0 {
            return Err(Error::Factorization { n, parts });
        }
        let q = n / parts;
        let s = T::from_f64(scale);
        let mut out = Tensor::zeros(&[parts, q, q]);
        let (fd, gd) = (fv.data(), gv.data());
        let od = out.data_mut();
        for p in 0..parts {
            for i in 0..q {
                let srow = &mut od[(p * q + i) * q..(p * q + i + 1) * q];
                for c in 0..d {
                    let a = fd[c * n + p * q + i];
                    tensor::axpy(a, &gd[c * n + p * q..c * n + (p + 1) * q], srow);
                }
                srow.iter_mut().for_each(|v| *v *= s);
            }
        }
        let rg = self.rg(f) || self.rg(g);
        self.push(out, Op::GroupScores { f, g, scale }, rg, "group_scores")
    }

    /// Column softmax of every trailing `q×q` block.
    pub fn softmax_cols(&mut self, s: Var) -> Result<Var> {
        let out = tensor::softmax_cols(self.value(s))?;
        let rg = self.rg(s);
        self.push(out, Op::SoftmaxCols(s), rg, "softmax_cols")
    }

    /// Per-group mixing: with `h: [d, parts·q]` and `a: [parts, q, q]`,
    /// output column `p·q+j` is `Σ_i h[:, p·q+i] · a[p, i, j]`.
    pub fn group_mix(&mut self, h: Var, a: Var) -> Result<Var> {
        let (hv, av) = (self.value(h), self.value(a));
        let (d, n) = hv.dims2("group_mix")?;
        let (parts, q, q2) = av.dims3("group_mix")?;
        if q != q2 || parts * q != n {
            return Err(Error::dim("group_mix", hv.shape(), av.shape()));
        }
        let mut out = Tensor::zeros(&[d, n]);
        let (hd, ad) = (hv.data(), av.data());
        let od = out.data_mut();
        for p in 0..parts {
            for c in 0..d {
                let yrow = &mut od[c * n + p * q..c * n + (p + 1) * q];
                for i in 0..q {
                    tensor::axpy(hd[c * n + p * q + i], &ad[(p * q + i) * q..(p * q + i + 1) * q], yrow);
                }
            }
        }
        let rg = self.rg(h) || self.rg(a);
        self.push(out, Op::GroupMix { h, a }, rg, "group_mix")
    }

    /// Concatenation along the leading axis.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| Error::contract("concat of nothing"))?;
        let tail = self.value(*first).shape()[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &v in xs {
            let t = self.value(v);
            if t.rank() == 0 || t.shape()[1..] != tail[..] {
                return Err(Error::dim("concat", self.value(*first).shape(), t.shape()));
            }
            lead += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![lead];
        shape.extend_from_slice(&tail);
        let out = Tensor::new(shape, data)?;
        let rg = xs.iter().any(|&v| self.rg(v));
        self.push(out, Op::Concat(xs.to_vec()), rg, "concat")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        self.push(out, Op::Reshape(x), rg, "reshape")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        let rg = self.rg(x);
        self.push(out, Op::Transpose(x), rg, "transpose")
    }

    /// Adjoints of every input and parameter leaf with respect to `loss`.
    pub fn gradients(&self, loss: Var) -> Result<Gradients<T>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract("backward requires a scalar loss"));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        let mut leaves: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        let mut visited = Vec::new();
        grads[loss.0] = Some(Tensor::ones(self.value(loss).shape()));
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            visited.push(i);
            match node.op {
                Op::Input | Op::Param => leaves[i] = Some(g),
                _ => self.propagate(node, g, &mut grads)?,
            }
        }
        let params = self
            .param_vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.filter(|v| v.0 < n).map(|v| (ParamId(i), v)))
            .collect();
        Ok(Gradients {
            leaves,
            params,
            visited,
        })
    }

    /// [`Tape::gradients`] followed by writing parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        let g = self.gradients(loss)?;
        g.write_params(store);
        Ok(g)
    }

    fn propagate(
        &self,
        node: &Node<T>,
        g: Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, t: Tensor<T>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (a, &b) in existing.data_mut().iter_mut().zip(t.data()) {
                        *a += b;
                    }
                }
                slot => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Input | Op::Param => unreachable!("leaves are collected by the caller"),
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k) = av.dims2("matmul")?;
                let n = bv.shape()[1];
                if self.rg(*a) {
                    let mut da = Tensor::zeros(&[m, k]);
                    tensor::gemm_nt(m, n, k, g.data(), bv.data(), da.data_mut());
                    acc(*a, da);
                }
                if self.rg(*b) {
                    let mut db = Tensor::zeros(&[k, n]);
                    tensor::gemm_tn(m, k, n, av.data(), g.data(), db.data_mut());
                    acc(*b, db);
                }
            }
            Op::Conv { x, w, b, spec } => {
                let (xv, wv) = (val(*x), val(*w));
                let geom = ConvGeom::new(xv.shape(), wv.shape(), *spec)?;
                if self.rg(*x) {
                    let mut dx = Tensor::zeros(xv.shape());
                    tensor::conv_backward_input(&geom, g.data(), wv.data(), dx.data_mut());
                    acc(*x, dx);
                }
                if self.rg(*w) {
                    let mut dw = Tensor::zeros(wv.shape());
                    tensor::conv_backward_weight(&geom, xv.data(), g.data(), dw.data_mut());
                    acc(*w, dw);
                }
                if let Some(b) = b.filter(|b| self.rg(*b)) {
                    let plane = geom.oh * geom.ow;
                    let db = Tensor::from_fn(val(b).shape(), |o| {
                        g.data()[o * plane..(o + 1) * plane].iter().fold(T::zero(), |s, &v| s + v)
                    });
                    acc(b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g);
            }
            Op::Sub(a, b) => {
                acc(*b, g.map(|v| -v));
                acc(*a, g);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if self.rg(*a) {
                    acc(*a, g.zip_map(bv, "mul", |x, y| x * y)?);
                }
                if self.rg(*b) {
                    acc(*b, g.zip_map(av, "mul", |x, y| x * y)?);
                }
            }
            Op::Affine { x, scale } => {
                let s = T::from_f64(*scale);
                acc(*x, g.map(|v| v * s));
            }
            Op::Relu(x) => {
                let d = g.zip_map(val(*x), "relu", |gv, xv| if xv > T::zero() { gv } else { T::zero() })?;
                acc(*x, d);
            }
            Op::Sigmoid(x) => {
                let d = g.zip_map(&node.value, "sigmoid", |gv, y| gv * y * (T::one() - y))?;
                acc(*x, d);
            }
            Op::Abs(x) => {
                let d = g.zip_map(val(*x), "abs", |gv, xv| {
                    if xv > T::zero() {
                        gv
                    } else if xv < T::zero() {
                        -gv
                    } else {
                        T::zero()
                    }
                })?;
                acc(*x, d);
            }
            Op::Square(x) => {
                let two = T::from_f64(2.0);
                let d = g.zip_map(val(*x), "square", |gv, xv| two * xv * gv)?;
                acc(*x, d);
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                acc(*x, Tensor::full(val(*x).shape(), s));
            }
            Op::Mean(x) => {
                let xv = val(*x);
                let s = g.data()[0] / T::from_f64(xv.len() as f64);
                acc(*x, Tensor::full(xv.shape(), s));
            }
            Op::Gather { x, idx } => {
                let xv = val(*x);
                let (_, n) = xv.dims2("gather_cols")?;
                let m = idx.len();
                let mut dx = Tensor::zeros(xv.shape());
                for (drow, grow) in dx.data_mut().chunks_exact_mut(n).zip(g.data().chunks_exact(m)) {
                    for (&i, &gv) in idx.iter().zip(grow) {
                        drow[i] += gv;
                    }
                }
                acc(*x, dx);
            }
            Op::GroupScores { f, g: gvar, scale } => {
                let (fv, gv) = (val(*f), val(*gvar));
                let (d, n) = fv.dims2("group_scores")?;
                let (parts, q, _) = node.value.dims3("group_scores")?;
                let s = T::from_f64(*scale);
                let ds = g.data();
                let (fd, gd) = (fv.data(), gv.data());
                if self.rg(*f) {
                    let mut df = Tensor::zeros(&[d, n]);
                    let dfd = df.data_mut();
                    for p in 0..parts {
                        for c in 0..d {
                            let grow = &gd[c * n + p * q..c * n + (p + 1) * q];
                            for i in 0..q {
                                let srow = &ds[(p * q + i) * q..(p * q + i + 1) * q];
                                dfd[c * n + p * q + i] = s * tensor::dot(srow, grow);
                            }
                        }
                    }
                    acc(*f, df);
                }
                if self.rg(*gvar) {
                    let mut dg = Tensor::zeros(&[d, n]);
                    let dgd = dg.data_mut();
                    for p in 0..parts {
                        for c in 0..d {
                            let drow = &mut dgd[c * n + p * q..c * n + (p + 1) * q];
                            for i in 0..q {
                                let srow = &ds[(p * q + i) * q..(p * q + i + 1) * q];
                                tensor::axpy(s * fd[c * n + p * q + i], srow, drow);
                            }
                        }
                    }
                    acc(*gvar, dg);
                }
            }
            Op::SoftmaxCols(x) => {
                let a = &node.value;
                let r = a.rank();
                let (rows, cols) = (a.shape()[r - 2], a.shape()[r - 1]);
                let mut dx = Tensor::zeros(a.shape());
                let mut colsum = vec![T::zero(); cols];
                for ((ab, gb), db) in a
                    .data()
                    .chunks_exact(rows * cols)
                    .zip(g.data().chunks_exact(rows * cols))
                    .zip(dx.data_mut().chunks_exact_mut(rows * cols))
                {
                    colsum.iter_mut().for_each(|v| *v = T::zero());
                    for (arow, grow) in ab.chunks_exact(cols).zip(gb.chunks_exact(cols)) {
                        for ((s, &av), &gv) in colsum.iter_mut().zip(arow).zip(grow) {
                            *s += av * gv;
                        }
                    }
                    for ((arow, grow), drow) in ab
                        .chunks_exact(cols)
                        .zip(gb.chunks_exact(cols))
                        .zip(db.chunks_exact_mut(cols))
                    {
                        for (((d, &av), &gv), &s) in drow.iter_mut().zip(arow).zip(grow).zip(&colsum) {
                            *d = av * (gv - s);
                        }
                    }
                }
                acc(*x, dx);
            }
            Op::GroupMix { h, a } => {
                let (hv, av) = (val(*h), val(*a));
                let (d, n) = hv.dims2("group_mix")?;
                let (parts, q, _) = av.dims3("group_mix")?;
                let (hd, ad, gd) = (hv.data(), av.data(), g.data());
                if self.rg(*h) {
                    let mut dh = Tensor::zeros(&[d, n]);
                    let dhd = dh.data_mut();
                    for p in 0..parts {
                        for c in 0..d {
                            let grow = &gd[c * n + p * q..c * n + (p + 1) * q];
                            for i in 0..q {
                                dhd[c * n + p * q + i] = tensor::dot(grow, &ad[(p * q + i) * q..(p * q + i + 1) * q]);
                            }
                        }
                    }
                    acc(*h, dh);
                }
                if self.rg(*a) {
                    let mut da = Tensor::zeros(av.shape());
                    let dad = da.data_mut();
                    for p in 0..parts {
                        for c in 0..d {
                            let grow = &gd[c * n + p * q..c * n + (p + 1) * q];
                            for i in 0..q {
                                tensor::axpy(hd[c * n + p * q + i], grow, &mut dad[(p * q + i) * q..(p * q + i + 1) * q]);
                            }
                        }
                    }
                    acc(*a, da);
                }
            }
            Op::Concat(xs) => {
                let mut offset = 0;
                for &v in xs {
                    let shape = val(v).shape();
                    let len = val(v).len();
                    if self.rg(v) {
                        acc(v, Tensor::new(shape.to_vec(), g.data()[offset..offset + len].to_vec())?);
                    }
                    offset += len;
                }
            }
            Op::Reshape(x) => {
                acc(*x, g.reshape(val(*x).shape())?);
            }
            Op::Transpose(x) => {
                acc(*x, g.transpose()?);
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
