//! Reverse-mode differentiation over a recorded list of tensor operations.
//!
//! A [`Graph`] is built fresh for every forward pass. Parameters enter the
//! graph through [`Graph::param`], which records a leaf tied to a
//! [`ParamId`]; [`Graph::backward`] walks the recording in reverse and adds
//! the resulting gradients into the owning [`ParamStore`].

use std::collections::HashMap;

use super::conv::{conv2d_backward, conv2d_forward, ConvGeometry};
use super::tensor::{depth_to_space, space_to_depth, Real, Tensor};
use crate::error::{shape_mismatch, Error, Result};

/// Norm below which a cosine term is treated as undefined and contributes zero.
pub const COSINE_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Owns every parameter of a model, addressed by [`ParamId`].
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter { name, value, grad });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv {
        x: NodeId,
        w: NodeId,
        geo: ConvGeometry,
        cols: Vec<T>,
    },
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LeakyRelu(NodeId, T),
    Abs(NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    SpaceToDepth(NodeId, usize),
    DepthToSpace(NodeId, usize),
    SpatialDiff { x: NodeId, axis: SpatialAxis },
    Reshape(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    AbsCosine { a: NodeId, b: NodeId, cos: Vec<T>, norms: Vec<(T, T)> },
}

/// Axis of a one-pixel backward difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialAxis {
    Vertical,
    Horizontal,
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A single forward recording. Not shared across threads; build one per pass.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, NodeId>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> T {
        self.nodes[id.0].value.data()[0]
    }

    /// A constant leaf; gradients never flow into it.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Copies a node's value into a fresh constant leaf.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let v = self.value(id).clone();
        self.input(v)
    }

    /// Leaf bound to a stored parameter. Repeated calls reuse one node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        if let Some(&node) = self.params.get(&id) {
            return node;
        }
        let node = self.push(store.value(id).clone(), Op::Param(id), true);
        self.params.insert(id, node);
        node
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        let (out, geo, cols) = conv2d_forward(self.value(x), self.value(w), stride, padding)?;
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(out, Op::Conv { x, w, geo, cols }, rg))
    }

    /// Adds a per-channel bias `[C]` to a `[B, C, H, W]` node.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (b, c, h, w) = self.value(x).dims4();
        if self.shape(bias) != [c] {
            return Err(shape_mismatch("add_bias", self.shape(x), self.shape(bias)));
        }
        let mut out = self.value(x).clone();
        let bv = self.value(bias).data().to_vec();
        for (i, chunk) in out.data_mut().chunks_mut(h * w).enumerate() {
            let add = bv[i % c];
            chunk.iter_mut().for_each(|v| *v = *v + add);
        }
        debug_assert_eq!(out.len(), b * c * h * w);
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "hadamard", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let out = self.value(a).map(|v| v * c);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|v| v.tanh());
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: T) -> NodeId {
        let out = self.value(a).map(|v| if v > T::zero() { v } else { v * slope });
        let rg = self.rg(a);
        self.push(out, Op::LeakyRelu(a, slope), rg)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|v| v.abs());
        let rg = self.rg(a);
        self.push(out, Op::Abs(a), rg)
    }

    /// Concatenates `[B, Ci, H, W]` nodes along the channel axis, in order.
    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let (b, _, h, w) = self.value(first).dims4();
        let mut channels = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 4 || s[0] != b || s[2] != h || s[3] != w {
                return Err(shape_mismatch("concat_channels", self.shape(first), s));
            }
            channels += s[1];
        }
        let mut data = Vec::with_capacity(b * channels * h * w);
        for bi in 0..b {
            for &p in parts {
                let v = self.value(p);
                let per = v.dim(1) * h * w;
                data.extend_from_slice(&v.data()[bi * per..(bi + 1) * per]);
            }
        }
        let out = Tensor::from_vec(&[b, channels, h, w], data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Channels `start..start + len` of a `[B, C, H, W]` node.
    pub fn slice_channels(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (b, c, h, w) = self.value(x).dims4();
        if start + len > c || len == 0 {
            return Err(Error::InvalidArgument(format!(
                "channel slice {start}..{} out of range for {c} channels",
                start + len
            )));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(b * len * h * w);
        for bi in 0..b {
            data.extend_from_slice(&src[(bi * c + start) * h * w..(bi * c + start + len) * h * w]);
        }
        let out = Tensor::from_vec(&[b, len, h, w], data)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Slice { x, start }, rg))
    }

    /// Splits the channel axis into `n` equal consecutive chunks.
    pub fn split_channels(&mut self, x: NodeId, n: usize) -> Result<Vec<NodeId>> {
        let c = self.value(x).dim(1);
        if n == 0 || !c.is_multiple_of(n) {
            return Err(Error::InvalidArgument(format!("cannot split {c} channels into {n} parts")));
        }
        let len = c / n;
        (0..n).map(|i| self.slice_channels(x, i * len, len)).collect()
    }

    pub fn space_to_depth(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let out = space_to_depth(self.value(x), factor)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SpaceToDepth(x, factor), rg))
    }

    pub fn depth_to_space(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let out = depth_to_space(self.value(x), factor)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::DepthToSpace(x, factor), rg))
    }

    /// One-pixel backward difference `x[i] - x[i-1]` over valid pixel pairs.
    pub fn spatial_diff(&mut self, x: NodeId, axis: SpatialAxis) -> Result<NodeId> {
        let (b, c, h, w) = self.value(x).dims4();
        let src = self.value(x).data();
        let (oh, ow) = match axis {
            SpatialAxis::Vertical => (h.saturating_sub(1), w),
            SpatialAxis::Horizontal => (h, w.saturating_sub(1)),
        };
        if oh == 0 || ow == 0 {
            return Err(Error::InvalidArgument(format!("spatial_diff needs at least 2 pixels, got {h}x{w}")));
        }
        let mut data = Vec::with_capacity(b * c * oh * ow);
        for plane in src.chunks(h * w) {
            for y in 0..oh {
                for x in 0..ow {
                    let (cur, prev) = match axis {
                        SpatialAxis::Vertical => (plane[(y + 1) * w + x], plane[y * w + x]),
                        SpatialAxis::Horizontal => (plane[y * w + x + 1], plane[y * w + x]),
                    };
                    data.push(cur - prev);
                }
            }
        }
        let out = Tensor::from_vec(&[b, c, oh, ow], data)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SpatialDiff { x, axis }, rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(x);
        self.push(out, Op::Mean(x), rg)
    }

    /// Mean of squared differences over all elements.
    pub fn mse_mean(&mut self, prediction: NodeId, target: NodeId) -> Result<NodeId> {
        let d = self.sub(prediction, target)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Sum of the L1 distance over all elements.
    pub fn abs_diff_l1(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let d = self.sub(a, b)?;
        let d = self.abs(d);
        Ok(self.sum(d))
    }

    /// Per-sample `|cos|` between flattened batch items, as a `[B]` node.
    ///
    /// Items where either norm falls below [`COSINE_NORM_FLOOR`] yield 0; the
    /// second return value counts them.
    pub fn abs_cosine(&mut self, a: NodeId, b: NodeId) -> Result<(NodeId, usize)> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_mismatch("abs_cosine", self.shape(a), self.shape(b)));
        }
        let batch = self.value(a).dim(0);
        let per = self.value(a).len() / batch;
        let floor = T::from_f64(COSINE_NORM_FLOOR);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut cos = Vec::with_capacity(batch);
        let mut norms = Vec::with_capacity(batch);
        let mut guarded = 0;
        for i in 0..batch {
            let (sa, sb) = (&av[i * per..(i + 1) * per], &bv[i * per..(i + 1) * per]);
            let dot = sa.iter().zip(sb).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
            let na = sa.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
            let nb = sb.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
            if na < floor || nb < floor {
                guarded += 1;
                cos.push(T::zero());
                norms.push((T::zero(), T::zero()));
            } else {
                cos.push(dot / (na * nb));
                norms.push((na, nb));
            }
        }
        let out = Tensor::from_vec(&[batch], cos.iter().map(|c| c.abs()).collect())?;
        let rg = self.rg(a) || self.rg(b);
        Ok((self.push(out, Op::AbsCosine { a, b, cos, norms }, rg), guarded))
    }

    /// Propagates d(loss)/d(node) back to every reachable parameter and adds
    /// the result into `store`'s gradients.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore<T>) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(self.shape(loss)));
        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.backward_node(node, &dy, &mut grads, store);
        }
        Ok(())
    }

    fn backward_node(&self, node: &Node<T>, dy: &Tensor<T>, grads: &mut [Option<Tensor<T>>], store: &mut ParamStore<T>) {
        let mut acc = |id: NodeId, f: &dyn Fn(&mut [T])| {
            if !self.rg(id) {
                return;
            }
            let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(self.shape(id)));
            f(slot.data_mut());
        };
        let g = dy.data();
        match &node.op {
            Op::Leaf => {}
            Op::Param(pid) => store.get_mut(*pid).grad.add_assign(dy),
            Op::Conv { x, w, geo, cols } => {
                let kernel = self.value(*w).data();
                let mut dw = self.rg(*w).then(|| vec![T::zero(); kernel.len()]);
                let mut dx = self.rg(*x).then(|| vec![T::zero(); self.value(*x).len()]);
                conv2d_backward(geo, cols, kernel, g, dw.as_deref_mut(), dx.as_deref_mut());
                if let Some(dw) = dw {
                    acc(*w, &|s| add_into(s, &dw));
                }
                if let Some(dx) = dx {
                    acc(*x, &|s| add_into(s, &dx));
                }
            }
            Op::AddBias(x, b) => {
                acc(*x, &|s| add_into(s, g));
                let c = self.value(*b).len();
                let hw = g.len() / (self.value(*x).dim(0) * c);
                acc(*b, &|s| {
                    for (i, chunk) in g.chunks(hw).enumerate() {
                        s[i % c] = s[i % c] + chunk.iter().fold(T::zero(), |a, &v| a + v);
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &|s| add_into(s, g));
                acc(*b, &|s| add_into(s, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &|s| add_into(s, g));
                acc(*b, &|s| s.iter_mut().zip(g).for_each(|(d, &v)| *d = *d - v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &|s| {
                    for ((d, &gv), &o) in s.iter_mut().zip(g).zip(bv) {
                        *d = *d + gv * o;
                    }
                });
                acc(*b, &|s| {
                    for ((d, &gv), &o) in s.iter_mut().zip(g).zip(av) {
                        *d = *d + gv * o;
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &|s| s.iter_mut().zip(g).for_each(|(d, &v)| *d = *d + v * *c)),
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &|s| {
                    for ((d, &gv), &yv) in s.iter_mut().zip(g).zip(y) {
                        *d = *d + gv * yv * (T::one() - yv);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &|s| {
                    for ((d, &gv), &yv) in s.iter_mut().zip(g).zip(y) {
                        *d = *d + gv * (T::one() - yv * yv);
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                acc(*a, &|s| {
                    for ((d, &gv), &xv) in s.iter_mut().zip(g).zip(x) {
                        *d = *d + if xv > T::zero() { gv } else { gv * *slope };
                    }
                });
            }
            Op::Abs(a) => {
                let x = self.value(*a).data();
                acc(*a, &|s| {
                    for ((d, &gv), &xv) in s.iter_mut().zip(g).zip(x) {
                        *d = *d + gv * sign(xv);
                    }
                });
            }
            Op::Concat(parts) => {
                let (b, c, h, w) = node.value.dims4();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).dim(1);
                    acc(p, &|s| {
                        for bi in 0..b {
                            let src = &g[(bi * c + offset) * h * w..(bi * c + offset + pc) * h * w];
                            add_into(&mut s[bi * pc * h * w..(bi + 1) * pc * h * w], src);
                        }
                    });
                    offset += pc;
                }
            }
            Op::Slice { x, start } => {
                let (b, len, h, w) = node.value.dims4();
                let c = self.value(*x).dim(1);
                acc(*x, &|s| {
                    for bi in 0..b {
                        let dst = &mut s[(bi * c + start) * h * w..(bi * c + start + len) * h * w];
                        add_into(dst, &g[bi * len * h * w..(bi + 1) * len * h * w]);
                    }
                });
            }
            Op::SpaceToDepth(x, f) => {
                let back = depth_to_space(dy, *f).expect("shape recorded in forward");
                acc(*x, &|s| add_into(s, back.data()));
            }
            Op::DepthToSpace(x, f) => {
                let back = space_to_depth(dy, *f).expect("shape recorded in forward");
                acc(*x, &|s| add_into(s, back.data()));
            }
            Op::SpatialDiff { x, axis } => {
                let (_, _, h, w) = self.value(*x).dims4();
                let (_, _, oh, ow) = node.value.dims4();
                acc(*x, &|s| {
                    for (plane, gp) in s.chunks_mut(h * w).zip(g.chunks(oh * ow)) {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let gv = gp[y * ow + xx];
                                let (cur, prev) = match axis {
                                    SpatialAxis::Vertical => ((y + 1) * w + xx, y * w + xx),
                                    SpatialAxis::Horizontal => (y * w + xx + 1, y * w + xx),
                                };
                                plane[cur] = plane[cur] + gv;
                                plane[prev] = plane[prev] - gv;
                            }
                        }
                    }
                });
            }
            Op::Reshape(x) => acc(*x, &|s| add_into(s, g)),
            Op::Sum(x) => acc(*x, &|s| s.iter_mut().for_each(|d| *d = *d + g[0])),
            Op::Mean(x) => {
                let n = T::from_f64(self.value(*x).len() as f64);
                acc(*x, &|s| s.iter_mut().for_each(|d| *d = *d + g[0] / n));
            }
            Op::AbsCosine { a, b, cos, norms } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let per = av.len() / cos.len();
                // d|cos|/da = sign(cos) * (b / (|a||b|) - cos * a / |a|^2), symmetric in b.
                let grad_of = |own: &[T], other: &[T], own_norm: fn(&(T, T)) -> T, s: &mut [T]| {
                    for (i, (&c, n)) in cos.iter().zip(norms).enumerate() {
                        if n.0 == T::zero() {
                            continue;
                        }
                        let coef = g[i] * sign(c);
                        let on = own_norm(n);
                        let inv = T::one() / (n.0 * n.1);
                        let range = i * per..(i + 1) * per;
                        for ((d, &o), &x) in s[range.clone()].iter_mut().zip(&other[range.clone()]).zip(&own[range]) {
                            *d = *d + coef * (o * inv - c * x / (on * on));
                        }
                    }
                };
                acc(*a, &|s| grad_of(av, bv, |n| n.0, s));
                acc(*b, &|s| grad_of(bv, av, |n| n.1, s));
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
