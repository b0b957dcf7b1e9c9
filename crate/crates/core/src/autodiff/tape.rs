//! Reverse-mode differentiation over the handful of primitives the
//! conditioned MLP and its loss need.

use crate::autodiff::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    /// a(m×k) · b(k×n)
    MatMul(Var, Var),
    /// a(m×n) + bias(1×n) broadcast over rows
    AddRow(Var, Var),
    Relu(Var),
    /// [points(m×p) | code(1×c) repeated m times]
    ConcatBroadcast(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
}

impl<T> Op<T> {
    fn parents(&self) -> [Option<Var>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::Relu(a) | Op::Scale(a, _) | Op::Sum(a) => [Some(a), None],
            Op::MatMul(a, b)
            | Op::AddRow(a, b)
            | Op::ConcatBroadcast(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => [Some(a), Some(b)],
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    value: Tensor2<T>,
    requires_grad: bool,
}

/// Append-only record of a forward evaluation.
///
/// Nodes are stored in creation order, so every parent precedes its
/// children. ReLU uses the subgradient 0 at exactly 0.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf; `None` when the leaf does not require gradients
    /// or does not influence the seeded output. Interior nodes are consumed
    /// during the pass and always report `None`.
    pub fn get(&self, v: Var) -> Option<&Tensor2<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor2<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    /// Like [`get`](Self::get) but materializes a zero tensor of the given
    /// shape when no gradient reached the node.
    pub fn get_or_zeros(&self, v: Var, rows: usize, cols: usize) -> Tensor2<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor2::zeros(rows, cols))
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor2<T> {
        &self.nodes[v.0].value
    }

    fn node(&self, v: Var) -> Result<&Node<T>> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::State(format!("variable {} not recorded on this tape", v.0)))
    }

    fn push(&mut self, op: Op<T>, value: Tensor2<T>) -> Var {
        let requires_grad = op
            .parents()
            .iter()
            .flatten()
            .any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an input. Only leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor2<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.node(a)?.value.matmul(&self.node(b)?.value)?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (&self.node(a)?.value, &self.node(bias)?.value);
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::Shape(format!(
                "bias {}x{} does not broadcast over {}x{}",
                b.rows(),
                b.cols(),
                x.rows(),
                x.cols()
            )));
        }
        let mut value = x.clone();
        let cols = x.cols();
        for row in value.data_mut().chunks_exact_mut(cols) {
            for (v, &bv) in row.iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        Ok(self.push(Op::AddRow(a, bias), value))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self
            .node(a)?
            .value
            .map(|v| if v > T::zero() { v } else { T::zero() });
        Ok(self.push(Op::Relu(a), value))
    }

    pub fn concat_broadcast(&mut self, points: Var, code: Var) -> Result<Var> {
        let (p, c) = (&self.node(points)?.value, &self.node(code)?.value);
        if c.rows() != 1 {
            return Err(Error::Shape(format!(
                "broadcast code must be a single row, got {} rows",
                c.rows()
            )));
        }
        let width = p.cols() + c.cols();
        let mut data = Vec::with_capacity(p.rows() * width);
        for r in 0..p.rows() {
            data.extend_from_slice(p.row(r));
            data.extend_from_slice(c.data());
        }
        let value = Tensor2::from_vec(p.rows(), width, data)?;
        Ok(self.push(Op::ConcatBroadcast(points, code), value))
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor2<T>> {
        let (x, y) = (&self.node(a)?.value, &self.node(b)?.value);
        x.ensure_same_shape(y, what)?;
        let data = x.data().iter().zip(y.data()).map(|(&u, &v)| f(u, v)).collect();
        Tensor2::from_vec(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_with(a, b, "add", |u, v| u + v)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_with(a, b, "sub", |u, v| u - v)?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_with(a, b, "mul", |u, v| u * v)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var> {
        let value = self.node(a)?.value.map(|v| v * factor);
        Ok(self.push(Op::Scale(a, factor), value))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor2::scalar(self.node(a)?.value.sum());
        Ok(self.push(Op::Sum(a), value))
    }

    /// Propagates `seed` (the gradient of some objective with respect to
    /// `output`) back to every node that requires a gradient.
    pub fn backward(&self, output: Var, seed: Tensor2<T>) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called before any forward pass".into()));
        }
        let out = self.node(output)?;
        out.value.ensure_same_shape(&seed, "backward seed")?;

        let mut grads: Vec<Option<Tensor2<T>>> = vec![None; output.0 + 1];
        if out.requires_grad {
            grads[output.0] = Some(seed);
        }

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            // leaves keep their gradient for the caller
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    if self.nodes[a.0].requires_grad {
                        // dA = dC · Bᵀ
                        let mut da = Tensor2::zeros(m, k);
                        T::gemm(
                            m,
                            n,
                            k,
                            T::one(),
                            g.data(),
                            (n as isize, 1),
                            bv.data(),
                            (1, n as isize),
                            T::zero(),
                            da.data_mut(),
                            k as isize,
                        );
                        accumulate(&mut grads, a, da);
                    }
                    if self.nodes[b.0].requires_grad {
                        // dB = Aᵀ · dC
                        let mut db = Tensor2::zeros(k, n);
                        T::gemm(
                            k,
                            m,
                            n,
                            T::one(),
                            av.data(),
                            (1, k as isize),
                            g.data(),
                            (n as isize, 1),
                            T::zero(),
                            db.data_mut(),
                            n as isize,
                        );
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::AddRow(a, bias) => {
                    if self.nodes[bias.0].requires_grad {
                        let cols = g.cols();
                        let mut db = Tensor2::zeros(1, cols);
                        for row in g.data().chunks_exact(cols) {
                            for (d, &v) in db.data_mut().iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads, bias, db);
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g);
                    }
                }
                Op::Relu(a) => {
                    if self.nodes[a.0].requires_grad {
                        let mut da = g;
                        for (d, &y) in da.data_mut().iter_mut().zip(node.value.data()) {
                            if y <= T::zero() {
                                *d = T::zero();
                            }
                        }
                        accumulate(&mut grads, a, da);
                    }
                }
                Op::ConcatBroadcast(p, c) => {
                    let pw = self.nodes[p.0].value.cols();
                    let cw = self.nodes[c.0].value.cols();
                    let rows = g.rows();
                    if self.nodes[p.0].requires_grad {
                        let mut dp = Tensor2::zeros(rows, pw);
                        for r in 0..rows {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[..pw]);
                        }
                        accumulate(&mut grads, p, dp);
                    }
                    if self.nodes[c.0].requires_grad {
                        let mut dc = Tensor2::zeros(1, cw);
                        for r in 0..rows {
                            for (d, &v) in dc.data_mut().iter_mut().zip(&g.row(r)[pw..]) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads, c, dc);
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, b, g.clone());
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, b, g.map(|v| -v));
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    if self.nodes[a.0].requires_grad {
                        let mut da = g.clone();
                        for (d, &v) in da.data_mut().iter_mut().zip(bv.data()) {
                            *d *= v;
                        }
                        accumulate(&mut grads, a, da);
                    }
                    if self.nodes[b.0].requires_grad {
                        let mut db = g;
                        for (d, &v) in db.data_mut().iter_mut().zip(av.data()) {
                            *d *= v;
                        }
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::Scale(a, factor) => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g.map(|v| v * factor));
                    }
                }
                Op::Sum(a) => {
                    if self.nodes[a.0].requires_grad {
                        let (r, c) = self.nodes[a.0].value.shape();
                        accumulate(&mut grads, a, Tensor2::filled(r, c, g.get(0, 0)));
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor2<T>>], v: Var, delta: Tensor2<T>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e += *d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}
