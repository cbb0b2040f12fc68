//! Reverse-mode tape over batched tensors.
//!
//! Collocation points are rows of `Array2` values; one tape evaluation covers
//! the whole training set (or a chunk of it). Input derivatives of networks
//! are produced by forward jet columns built from the same taped operations,
//! so parameter gradients flow through `d/dx` and `d^2/dx^2` terms.
//!
//! A tape is confined to one evaluation; it is created, run forward while
//! being built, and swept backward once.

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{s, Array2};
use std::sync::Arc;

pub type NodeId = usize;

enum Op<T: Scalar> {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `(n x m) + row (1 x m)` broadcast over rows.
    AddRow(NodeId, NodeId),
    /// Repeat row `row` of the source `n` times.
    RowBroadcast { src: NodeId, row: usize },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    /// `a + c * b`.
    AddScaled(NodeId, T, NodeId),
    /// Elementwise k-th derivative of an activation.
    Act { z: NodeId, act: Activation<T>, k: u8 },
    /// Contract consecutive row blocks of length `block` with weights:
    /// `(nb*block x m) -> (nb x m)`.
    BlockAvg { x: NodeId, block: usize, w: Arc<Vec<T>> },
    /// Repeat each row `block` times: `(nb x m) -> (nb*block x m)`.
    BlockRepeat { x: NodeId, block: usize },
    /// Apply a constant matrix to every row block: `y_b = m . x_b`.
    BlockMat { x: NodeId, m: Arc<Array2<T>> },
    /// Weighted sum of squares of a column: `(n x 1) -> (1 x 1)`.
    SumSqW { x: NodeId, w: Arc<Vec<T>> },
}

struct Node<T: Scalar> {
    value: Array2<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Array2<T> {
        &self.nodes[id].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> T {
        debug_assert_eq!(self.nodes[id].value.dim(), (1, 1));
        self.nodes[id].value[(0, 0)]
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable input (network weights or biases).
    pub fn param(&mut self, value: Array2<T>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a, b), needs)
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[row].value.nrows(), 1);
        let value = &self.nodes[a].value + &self.nodes[row].value;
        let needs = self.needs(a) || self.needs(row);
        self.push(value, Op::AddRow(a, row), needs)
    }

    pub fn row_broadcast(&mut self, src: NodeId, row: usize, n: usize) -> NodeId {
        let r = self.nodes[src].value.row(row).to_owned();
        let mut value = Array2::zeros((n, r.len()));
        for mut out in value.rows_mut() {
            out.assign(&r);
        }
        let needs = self.needs(src);
        self.push(value, Op::RowBroadcast { src, row }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value + &self.nodes[b].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a, b), needs)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value - &self.nodes[b].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Sub(a, b), needs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value * &self.nodes[b].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Mul(a, b), needs)
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let value = self.nodes[a].value.mapv(|x| x * c);
        let needs = self.needs(a);
        self.push(value, Op::Scale(a, c), needs)
    }

    pub fn add_scaled(&mut self, a: NodeId, c: T, b: NodeId) -> NodeId {
        let value = &self.nodes[a].value + &self.nodes[b].value.mapv(|x| x * c);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::AddScaled(a, c, b), needs)
    }

    pub fn act(&mut self, z: NodeId, act: Activation<T>, k: u8) -> NodeId {
        let value = self.nodes[z].value.mapv(|x| act.deriv(x, k));
        let needs = self.needs(z);
        self.push(value, Op::Act { z, act, k }, needs)
    }

    pub fn block_avg(&mut self, x: NodeId, block: usize, w: Arc<Vec<T>>) -> NodeId {
        let xv = &self.nodes[x].value;
        debug_assert_eq!(xv.nrows() % block, 0);
        debug_assert_eq!(w.len(), block);
        let nb = xv.nrows() / block;
        let m = xv.ncols();
        let mut value = Array2::zeros((nb, m));
        for i in 0..nb {
            for j in 0..block {
                let wj = w[j];
                for c in 0..m {
                    value[(i, c)] = value[(i, c)] + wj * xv[(i * block + j, c)];
                }
            }
        }
        let needs = self.needs(x);
        self.push(value, Op::BlockAvg { x, block, w }, needs)
    }

    pub fn block_repeat(&mut self, x: NodeId, block: usize) -> NodeId {
        let xv = &self.nodes[x].value;
        let (nb, m) = xv.dim();
        let mut value = Array2::zeros((nb * block, m));
        for i in 0..nb {
            for j in 0..block {
                for c in 0..m {
                    value[(i * block + j, c)] = xv[(i, c)];
                }
            }
        }
        let needs = self.needs(x);
        self.push(value, Op::BlockRepeat { x, block }, needs)
    }

    pub fn block_mat(&mut self, x: NodeId, m: Arc<Array2<T>>) -> NodeId {
        let xv = &self.nodes[x].value;
        let block = m.nrows();
        debug_assert_eq!(m.ncols(), block);
        debug_assert_eq!(xv.nrows() % block, 0);
        let nb = xv.nrows() / block;
        let mut value = Array2::zeros(xv.dim());
        for b in 0..nb {
            let rows = s![b * block..(b + 1) * block, ..];
            let y = m.dot(&xv.slice(rows));
            value.slice_mut(rows).assign(&y);
        }
        let needs = self.needs(x);
        self.push(value, Op::BlockMat { x, m }, needs)
    }

    pub fn sum_sq_weighted(&mut self, x: NodeId, w: Arc<Vec<T>>) -> NodeId {
        let xv = &self.nodes[x].value;
        debug_assert_eq!(xv.ncols(), 1);
        debug_assert_eq!(w.len(), xv.nrows());
        let mut total = T::zero();
        for (i, &wi) in w.iter().enumerate() {
            let v = xv[(i, 0)];
            total += wi * v * v;
        }
        let needs = self.needs(x);
        self.push(
            Array2::from_elem((1, 1), total),
            Op::SumSqW { x, w },
            needs,
        )
    }

    /// Reverse sweep from a `1 x 1` root; returns per-node adjoints for every
    /// node on a gradient path.
    pub fn backward(&self, root: NodeId) -> Result<Grads<T>> {
        if self.nodes[root].value.dim() != (1, 1) {
            return Err(Error::Internal(
                "backward root must be a scalar node".into(),
            ));
        }
        let mut g: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[root].needs_grad {
            return Ok(Grads { g });
        }
        g[root] = Some(Array2::from_elem((1, 1), T::one()));
        for id in (0..=root).rev() {
            let Some(gy) = g[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {
                    g[id] = Some(gy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let da = gy.dot(&self.nodes[*b].value.t());
                        accumulate(&mut g, *a, da);
                    }
                    if self.needs(*b) {
                        let db = self.nodes[*a].value.t().dot(&gy);
                        accumulate(&mut g, *b, db);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.needs(*row) {
                        let mut dr = Array2::zeros((1, gy.ncols()));
                        for r in gy.rows() {
                            for (c, &v) in r.iter().enumerate() {
                                dr[(0, c)] += v;
                            }
                        }
                        accumulate(&mut g, *row, dr);
                    }
                    if self.needs(*a) {
                        accumulate(&mut g, *a, gy);
                    }
                }
                Op::RowBroadcast { src, row } => {
                    if self.needs(*src) {
                        let mut ds = Array2::zeros(self.nodes[*src].value.dim());
                        for r in gy.rows() {
                            for (c, &v) in r.iter().enumerate() {
                                ds[(*row, c)] += v;
                            }
                        }
                        accumulate(&mut g, *src, ds);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut g, *b, gy.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut g, *a, gy);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut g, *b, gy.mapv(|v| -v));
                    }
                    if self.needs(*a) {
                        accumulate(&mut g, *a, gy);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut g, *a, &gy * &self.nodes[*b].value);
                    }
                    if self.needs(*b) {
                        accumulate(&mut g, *b, &gy * &self.nodes[*a].value);
                    }
                }
                Op::Scale(a, c) => {
                    if self.needs(*a) {
                        accumulate(&mut g, *a, gy.mapv(|v| v * *c));
                    }
                }
                Op::AddScaled(a, c, b) => {
                    if self.needs(*b) {
                        accumulate(&mut g, *b, gy.mapv(|v| v * *c));
                    }
                    if self.needs(*a) {
                        accumulate(&mut g, *a, gy);
                    }
                }
                Op::Act { z, act, k } => {
                    if self.needs(*z) {
                        let dz = self.nodes[*z].value.mapv(|x| act.deriv(x, k + 1)) * &gy;
                        accumulate(&mut g, *z, dz);
                    }
                }
                Op::BlockAvg { x, block, w } => {
                    if self.needs(*x) {
                        let mut dx = Array2::zeros(self.nodes[*x].value.dim());
                        let (nb, m) = gy.dim();
                        for i in 0..nb {
                            for j in 0..*block {
                                let wj = w[j];
                                for c in 0..m {
                                    dx[(i * block + j, c)] = wj * gy[(i, c)];
                                }
                            }
                        }
                        accumulate(&mut g, *x, dx);
                    }
                }
                Op::BlockRepeat { x, block } => {
                    if self.needs(*x) {
                        let (nb, m) = self.nodes[*x].value.dim();
                        let mut dx = Array2::zeros((nb, m));
                        for i in 0..nb {
                            for j in 0..*block {
                                for c in 0..m {
                                    dx[(i, c)] += gy[(i * block + j, c)];
                                }
                            }
                        }
                        accumulate(&mut g, *x, dx);
                    }
                }
                Op::BlockMat { x, m } => {
                    if self.needs(*x) {
                        let block = m.nrows();
                        let mut dx = Array2::zeros(self.nodes[*x].value.dim());
                        let nb = dx.nrows() / block;
                        let mt = m.t();
                        for b in 0..nb {
                            let rows = s![b * block..(b + 1) * block, ..];
                            let d = mt.dot(&gy.slice(rows));
                            dx.slice_mut(rows).assign(&d);
                        }
                        accumulate(&mut g, *x, dx);
                    }
                }
                Op::SumSqW { x, w } => {
                    if self.needs(*x) {
                        let xv = &self.nodes[*x].value;
                        let scale = T::of(2.0) * gy[(0, 0)];
                        let mut dx = Array2::zeros(xv.dim());
                        for (i, &wi) in w.iter().enumerate() {
                            dx[(i, 0)] = scale * wi * xv[(i, 0)];
                        }
                        accumulate(&mut g, *x, dx);
                    }
                }
            }
        }
        Ok(Grads { g })
    }
}

fn accumulate<T: Scalar>(g: &mut [Option<Array2<T>>], id: NodeId, add: Array2<T>) {
    match &mut g[id] {
        Some(existing) => *existing += &add,
        slot @ None => *slot = Some(add),
    }
}

/// Adjoints produced by [`Tape::backward`].
pub struct Grads<T> {
    g: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Grads<T> {
    /// Adjoint of a node; reading a node that never received gradient (a
    /// constant, or untracked value) is a tape-usage error.
    pub fn get(&self, id: NodeId) -> Result<&Array2<T>> {
        self.g[id]
            .as_ref()
            .ok_or_else(|| Error::Internal(format!("node {id} carries no gradient")))
    }

    pub fn get_opt(&self, id: NodeId) -> Option<&Array2<T>> {
        self.g[id].as_ref()
    }
}
