use super::{matmul_dims, transpose_block, Result, Scalar, Tensor, TensorError};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    SwapLast2(Var),
    Reshape(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Gelu(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<f64>,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Select {
        x: Var,
        axis: usize,
        index: usize,
    },
    Expand(Var),
    Sum(Var),
    MeanAxis {
        x: Var,
        axis: usize,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
    op: Op<T>,
}

/// Ordered record of executed operations. Nodes are appended in execution
/// order, so reverse index order is reverse execution order.
#[derive(Debug)]
pub struct Tape<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    non_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// `(outer, dim, inner)` split of `shape` around `axis`.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if long[long.len() - short.len()..] != *short {
        return Err(TensorError::Shape {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(long.to_vec())
}

/// Sum a full-size gradient down to a trailing-suffix operand of length `n`.
fn reduce_to<T: Scalar>(g: &[T], n: usize) -> Vec<T> {
    if g.len() == n {
        return g.to_vec();
    }
    let mut acc = vec![0.0f64; n];
    for (j, v) in g.iter().enumerate() {
        acc[j % n] += v.as_f64();
    }
    acc.into_iter().map(T::from_f64).collect()
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            non_finite: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Set when a debug build observed a non-finite op output.
    pub fn non_finite_flagged(&self) -> bool {
        self.non_finite
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        if cfg!(debug_assertions) && !self.non_finite && !value.all_finite() {
            log::warn!("non-finite output at tape node {}", self.nodes.len());
            self.non_finite = true;
        }
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient; `None` for tensors that do not require grad or
    /// have not been reached by a backward pass.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    /// Swap the last two axes of a tensor with at least two dimensions.
    pub fn swap_last2(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let nd = x.ndim();
        if nd < 2 {
            return Err(TensorError::Contract(format!(
                "swap_last2 needs >= 2 dims, got {:?}",
                x.shape()
            )));
        }
        let (r, c) = (x.shape()[nd - 2], x.shape()[nd - 1]);
        let data = swap_blocks(x.data(), r, c);
        let mut shape = x.shape().to_vec();
        shape.swap(nd - 2, nd - 1);
        let rg = self.rg(a);
        Ok(self.push(Tensor { shape, data }, Op::SwapLast2(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<(Tensor<T>, bool)> {
        let (x, y) = (self.value(a), self.value(b));
        let shape = broadcast_shape(name, x.shape(), y.shape())?;
        let n: usize = shape.iter().product();
        let (xn, yn) = (x.len(), y.len());
        let data = (0..n)
            .map(|j| f(x.data()[j % xn], y.data()[j % yn]))
            .collect();
        Ok((Tensor { shape, data }, self.rg(a) || self.rg(b)))
    }

    /// Elementwise sum; the shorter operand broadcasts over leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, rg) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, rg) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, rg) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|v| v * c);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.tanh());
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| T::from_f64(gelu(v.as_f64())));
        let rg = self.rg(a);
        self.push(out, Op::Gelu(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.ln());
        let rg = self.rg(a);
        self.push(out, Op::Log(a), rg)
    }

    fn rowwise(&self, a: Var, f: impl Fn(&[f64]) -> Vec<f64>) -> Tensor<T> {
        let x = self.value(a);
        let k = x.last_dim();
        let mut data = Vec::with_capacity(x.len());
        let mut buf = vec![0.0; k];
        for row in x.data().chunks(k.max(1)) {
            for (b, v) in buf.iter_mut().zip(row) {
                *b = v.as_f64();
            }
            data.extend(f(&buf).into_iter().map(T::from_f64));
        }
        Tensor {
            shape: x.shape().to_vec(),
            data,
        }
    }

    /// Softmax over the last dimension.
    pub fn softmax(&mut self, a: Var) -> Var {
        let out = self.rowwise(a, super::softmax_row);
        let rg = self.rg(a);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Log-softmax over the last dimension in the fused `x - max - log(sum(exp))` form.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let out = self.rowwise(a, |row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            row.iter().map(|&v| v - lse).collect()
        });
        let rg = self.rg(a);
        self.push(out, Op::LogSoftmax(a), rg)
    }

    /// Standardize over the last dimension, then apply `gain` and `bias`.
    pub fn layernorm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let d = x.last_dim();
        if d == 0 || x.ndim() == 0 {
            return Err(TensorError::Contract(
                "layernorm over a zero-length last dimension".into(),
            ));
        }
        for p in [gain, bias] {
            if self.value(p).shape() != [d] {
                return Err(TensorError::Shape {
                    op: "layernorm",
                    lhs: x.shape().to_vec(),
                    rhs: self.value(p).shape().to_vec(),
                });
            }
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = Vec::with_capacity(x.len());
        let mut rstd = Vec::with_capacity(x.len() / d);
        let mut data = Vec::with_capacity(x.len());
        for row in x.data().chunks(d) {
            let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / d as f64;
            let var = row
                .iter()
                .map(|v| (v.as_f64() - mean).powi(2))
                .sum::<f64>()
                / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd.push(r);
            for (j, v) in row.iter().enumerate() {
                let h = (v.as_f64() - mean) * r;
                xhat.push(T::from_f64(h));
                data.push(T::from_f64(h * g[j].as_f64() + b[j].as_f64()));
            }
        }
        let out = Tensor {
            shape: x.shape().to_vec(),
            data,
        };
        let rg = self.rg(a) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x: a,
                gain,
                bias,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Contract("concat of nothing".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::Contract(format!(
                "concat axis {axis} out of range for {base:?}"
            )));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != base.len()
                || s[..axis] != base[..axis]
                || s[axis + 1..] != base[axis + 1..]
            {
                return Err(TensorError::Shape {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let x = self.value(p);
                let blk = x.shape()[axis] * inner;
                data.extend_from_slice(&x.data()[o * blk..(o + 1) * blk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor { shape, data },
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Take slice `index` along `axis`, removing that axis.
    pub fn select(&mut self, a: Var, axis: usize, index: usize) -> Result<Var> {
        let x = self.value(a);
        if axis >= x.ndim() || index >= x.shape()[axis] {
            return Err(TensorError::Contract(format!(
                "select index {index} on axis {axis} of {:?}",
                x.shape()
            )));
        }
        let (outer, dim, inner) = axis_split(x.shape(), axis);
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * dim + index) * inner;
            data.extend_from_slice(&x.data()[start..start + inner]);
        }
        let mut shape = x.shape().to_vec();
        shape.remove(axis);
        let rg = self.rg(a);
        Ok(self.push(Tensor { shape, data }, Op::Select { x: a, axis, index }, rg))
    }

    /// Repeat along a new leading axis of size `n`.
    pub fn expand(&mut self, a: Var, n: usize) -> Var {
        let x = self.value(a);
        let mut shape = vec![n];
        shape.extend_from_slice(x.shape());
        let data = x.data().repeat(n);
        let rg = self.rg(a);
        self.push(Tensor { shape, data }, Op::Expand(a), rg)
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().map(|v| v.as_f64()).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(T::from_f64(s)), Op::Sum(a), rg)
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum(a);
        self.scale(s, T::from_f64(1.0 / n as f64))
    }

    /// Mean along `axis`, removing that axis.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let x = self.value(a);
        if axis >= x.ndim() || x.shape()[axis] == 0 {
            return Err(TensorError::Contract(format!(
                "mean over axis {axis} of {:?}",
                x.shape()
            )));
        }
        let (outer, dim, inner) = axis_split(x.shape(), axis);
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let s: f64 = (0..dim)
                    .map(|d| x.data()[(o * dim + d) * inner + i].as_f64())
                    .sum();
                data.push(T::from_f64(s / dim as f64));
            }
        }
        let mut shape = x.shape().to_vec();
        shape.remove(axis);
        let rg = self.rg(a);
        Ok(self.push(Tensor { shape, data }, Op::MeanAxis { x: a, axis }, rg))
    }

    /// Reverse-mode sweep from a scalar root. Gradients are added to any
    /// gradient already stored, so repeated calls accumulate.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            let (true, Some(g)) = (node.requires_grad, g) else {
                continue;
            };
            match &mut node.grad {
                Some(acc) => {
                    for (a, v) in acc.data_mut().iter_mut().zip(g) {
                        *a = *a + v;
                    }
                }
                None => {
                    node.grad = Some(Tensor {
                        shape: node.value.shape().to_vec(),
                        data: g,
                    })
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let mut acc = |v: Var, contrib: Vec<T>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(buf) => {
                    for (b, c) in buf.iter_mut().zip(contrib) {
                        *b = *b + c;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let (m, k, n) = matmul_dims(x.shape(), y.shape()).expect("recorded shapes");
                if self.rg(*a) {
                    // dA = G · Bᵀ
                    let mut da = vec![T::zero(); m * k];
                    T::gemm(m, n, k, g, false, y.data(), true, T::zero(), &mut da);
                    acc(*a, da);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · G
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, x.data(), true, g, false, T::zero(), &mut db);
                    acc(*b, db);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (out.shape()[0], out.shape()[1]);
                acc(*a, transpose_block(g, r, c));
            }
            Op::SwapLast2(a) => {
                let nd = out.ndim();
                let (r, c) = (out.shape()[nd - 2], out.shape()[nd - 1]);
                acc(*a, swap_blocks(g, r, c));
            }
            Op::Reshape(a) | Op::Expand(a) => {
                let n = self.value(*a).len();
                acc(*a, reduce_to(g, n));
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let neg = matches!(node.op, Op::Sub(..));
                acc(*a, reduce_to(g, self.value(*a).len()));
                let gb = reduce_to(g, self.value(*b).len());
                acc(*b, if neg { gb.into_iter().map(|v| -v).collect() } else { gb });
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let (xn, yn) = (x.len(), y.len());
                if self.rg(*a) {
                    let full: Vec<T> = g
                        .iter()
                        .enumerate()
                        .map(|(j, &gv)| gv * y.data()[j % yn])
                        .collect();
                    acc(*a, reduce_to(&full, xn));
                }
                if self.rg(*b) {
                    let full: Vec<T> = g
                        .iter()
                        .enumerate()
                        .map(|(j, &gv)| gv * x.data()[j % xn])
                        .collect();
                    acc(*b, reduce_to(&full, yn));
                }
            }
            Op::Scale(a, c) => acc(*a, g.iter().map(|&v| v * *c).collect()),
            Op::Tanh(a) => acc(
                *a,
                g.iter()
                    .zip(out.data())
                    .map(|(&gv, &y)| gv * (T::one() - y * y))
                    .collect(),
            ),
            Op::Gelu(a) => acc(
                *a,
                g.iter()
                    .zip(self.value(*a).data())
                    .map(|(&gv, &x)| gv * T::from_f64(gelu_grad(x.as_f64())))
                    .collect(),
            ),
            Op::Log(a) => acc(
                *a,
                g.iter()
                    .zip(self.value(*a).data())
                    .map(|(&gv, &x)| gv / x)
                    .collect(),
            ),
            Op::Softmax(a) => {
                let k = out.last_dim();
                let mut dx = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks(k).zip(out.data().chunks(k)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                    dx.extend(
                        gr.iter()
                            .zip(yr)
                            .map(|(gv, y)| T::from_f64(y.as_f64() * (gv.as_f64() - dot))),
                    );
                }
                acc(*a, dx);
            }
            Op::LogSoftmax(a) => {
                let k = out.last_dim();
                let mut dx = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks(k).zip(out.data().chunks(k)) {
                    let total: f64 = gr.iter().map(|v| v.as_f64()).sum();
                    dx.extend(
                        gr.iter()
                            .zip(yr)
                            .map(|(gv, y)| T::from_f64(gv.as_f64() - y.as_f64().exp() * total)),
                    );
                }
                acc(*a, dx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let d = out.last_dim();
                let gn = self.value(*gain).data();
                if self.rg(*x) {
                    let mut dx = Vec::with_capacity(g.len());
                    for ((gr, hr), r) in g.chunks(d).zip(xhat.chunks(d)).zip(rstd) {
                        let gg: Vec<f64> =
                            gr.iter().zip(gn).map(|(a, b)| a.as_f64() * b.as_f64()).collect();
                        let mean_g = gg.iter().sum::<f64>() / d as f64;
                        let mean_gh = gg
                            .iter()
                            .zip(hr)
                            .map(|(a, h)| a * h.as_f64())
                            .sum::<f64>()
                            / d as f64;
                        dx.extend(
                            gg.iter()
                                .zip(hr)
                                .map(|(a, h)| T::from_f64(r * (a - mean_g - h.as_f64() * mean_gh))),
                        );
                    }
                    acc(*x, dx);
                }
                if self.rg(*gain) {
                    let mut dg = vec![0.0f64; d];
                    for (gr, hr) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            dg[j] += gr[j].as_f64() * hr[j].as_f64();
                        }
                    }
                    acc(*gain, dg.into_iter().map(T::from_f64).collect());
                }
                if self.rg(*bias) {
                    acc(*bias, reduce_to(g, d));
                }
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = axis_split(out.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let dim = self.shape(p)[*axis];
                    if self.rg(p) {
                        let mut gp = Vec::with_capacity(outer * dim * inner);
                        for o in 0..outer {
                            let start = (o * total + offset) * inner;
                            gp.extend_from_slice(&g[start..start + dim * inner]);
                        }
                        acc(p, gp);
                    }
                    offset += dim;
                }
            }
            Op::Select { x, axis, index } => {
                let (outer, dim, inner) = axis_split(self.shape(*x), *axis);
                let mut gx = vec![T::zero(); outer * dim * inner];
                for o in 0..outer {
                    let start = (o * dim + index) * inner;
                    gx[start..start + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
                }
                acc(*x, gx);
            }
            Op::Sum(a) => acc(*a, vec![g[0]; self.value(*a).len()]),
            Op::MeanAxis { x, axis } => {
                let (outer, dim, inner) = axis_split(self.shape(*x), *axis);
                let inv = T::from_f64(1.0 / dim as f64);
                let mut gx = Vec::with_capacity(outer * dim * inner);
                for o in 0..outer {
                    for _ in 0..dim {
                        gx.extend(g[o * inner..(o + 1) * inner].iter().map(|&v| v * inv));
                    }
                }
                acc(*x, gx);
            }
        }
    }
}

/// Transpose each trailing `r x c` block.
fn swap_blocks<T: Copy>(src: &[T], r: usize, c: usize) -> Vec<T> {
    let blk = r * c;
    if blk == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(src.len());
    for b in src.chunks(blk) {
        out.extend(transpose_block(b, r, c));
    }
    out
}
