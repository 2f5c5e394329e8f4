use super::params::{ParamId, ParamStore};
use crate::backends::ActivationKind;
use crate::error::{shape_err, Error, Result};
use crate::tensor::kernels::{
    bcontract, bcontract_backward, gemm, rowkron, rowkron_backward, swap01, transpose,
};
use crate::tensor::DenseTensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddBias(Var, Var),
    Act(Var, ActivationKind, usize),
    Square(Var),
    Abs(Var),
    Sqrt(Var),
    Sum(Var),
    Mean(Var),
    RowKron(Var, Var),
    Swap01(Var),
    Transpose(Var),
    BContract(Var, Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    Column(Var, usize),
    GatherRows(Var, Vec<usize>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: DenseTensor,
}

/// Append-only computation graph for reverse-mode differentiation.
///
/// Every operation appends one node whose inputs are earlier nodes, so the
/// creation order is a topological order. The forward operands a node needs
/// for its backward rule are the values of its input nodes; nothing is
/// recomputed.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node after a reverse sweep.
#[derive(Debug)]
pub struct Adjoints {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Adjoints {
    /// `∂loss/∂node`, or `None` when the node does not reach the loss.
    pub fn get(&self, v: Var) -> Option<DenseTensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| DenseTensor::from_parts(self.shapes[v.0].clone(), g.clone()))
    }
}

fn matrix_dims(t: &DenseTensor, what: &str) -> Result<(usize, usize)> {
    if t.ndim() != 2 {
        return Err(shape_err!("{what} expects a matrix, got shape {:?}", t.shape()));
    }
    Ok((t.shape()[0], t.shape()[1]))
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

    pub fn value(&self, v: Var) -> &DenseTensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a one-element node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, op: Op, value: DenseTensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: DenseTensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, DenseTensor::from_parts(vec![1], vec![value]))
    }

    /// Leaf bound to a trainable parameter; its adjoint is accumulated into
    /// the parameter's gradient by [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(Op::Param(id), store.value(id).clone())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = matrix_dims(self.value(a), "matmul")?;
        let (k2, n) = matrix_dims(self.value(b), "matmul")?;
        if k != k2 {
            return Err(shape_err!("matmul inner extents differ: {m}×{k} · {k2}×{n}"));
        }
        let mut out = vec![0.0; m * n];
        gemm(false, false, m, k, n, self.value(a).data(), self.value(b).data(), &mut out, false);
        Ok(self.push(Op::MatMul(a, b), DenseTensor::from_parts(vec![m, n], out)))
    }

    fn zip_same(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err!("{what}: shapes {:?} and {:?} differ", va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(DenseTensor::from_parts(va.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "add", |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_same(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let v = self.value(a).scaled(alpha);
        self.push(Op::Scale(a, alpha), v)
    }

    /// Sums several same-shaped nodes left to right.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::Contract("add_all needs at least one term".into()))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// `x[i, j] + bias[j]` for a `m × n` matrix and a bias of `n` elements.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = matrix_dims(self.value(x), "add_bias")?;
        if self.value(bias).len() != n {
            return Err(shape_err!(
                "bias of {} elements cannot broadcast over {m}×{n}",
                self.value(bias).len()
            ));
        }
        let b = self.value(bias).data();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        Ok(self.push(Op::AddBias(x, bias), DenseTensor::from_parts(vec![m, n], data)))
    }

    /// Elementwise `σ^(order)(x)`. Backward needs `σ^(order+1)`, so `order`
    /// must stay below the activation's highest analytic derivative.
    pub fn activation(&mut self, x: Var, kind: ActivationKind, order: usize) -> Result<Var> {
        if order + 1 > kind.max_order() {
            return Err(Error::Capability(format!(
                "{kind} provides derivatives up to order {}, order {} requested with gradients",
                kind.max_order(),
                order + 1
            )));
        }
        let v = self.value(x).map(|z| kind.derivative(order, z));
        Ok(self.push(Op::Act(x, kind, order), v))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|z| z * z);
        self.push(Op::Square(x), v)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::abs);
        self.push(Op::Abs(x), v)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::sqrt);
        self.push(Op::Sqrt(x), v)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), DenseTensor::from_parts(vec![1], vec![s]))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(x), DenseTensor::from_parts(vec![1], vec![s]))
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let diff = self.sub(a, b)?;
        let sq = self.square(diff);
        Ok(self.mean(sq))
    }

    /// `a` is `n × r`, `z` is `r × p`; returns `r × (n·p)` with
    /// `out[q, i·p + j] = a[i, q]·z[q, j]`.
    pub fn rowkron(&mut self, a: Var, z: Var) -> Result<Var> {
        let (n, r) = matrix_dims(self.value(a), "rowkron")?;
        let (r2, p) = matrix_dims(self.value(z), "rowkron")?;
        if r != r2 {
            return Err(shape_err!("rowkron rank mismatch: {n}×{r} with {r2}×{p}"));
        }
        let out = rowkron(self.value(a).data(), self.value(z).data(), n, r, p);
        Ok(self.push(Op::RowKron(a, z), DenseTensor::from_parts(vec![r, n * p], out)))
    }

    /// `[a, b, c] → [b, a, c]`.
    pub fn swap01(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape();
        if s.len() != 3 {
            return Err(shape_err!("swap01 expects an order-3 tensor, got {s:?}"));
        }
        let (a, b, c) = (s[0], s[1], s[2]);
        let out = swap01(self.value(x).data(), a, b, c);
        Ok(self.push(Op::Swap01(x), DenseTensor::from_parts(vec![b, a, c], out)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = matrix_dims(self.value(x), "transpose")?;
        let out = transpose(self.value(x).data(), m, n);
        Ok(self.push(Op::Transpose(x), DenseTensor::from_parts(vec![n, m], out)))
    }

    /// Batched vector-matrix product: `v` is `batch × a`, `g` is
    /// `batch × (a·b)`; returns `batch × b`.
    pub fn bcontract(&mut self, v: Var, g: Var) -> Result<Var> {
        let (batch, a) = matrix_dims(self.value(v), "bcontract")?;
        let (batch2, ab) = matrix_dims(self.value(g), "bcontract")?;
        if batch != batch2 || ab % a != 0 {
            return Err(shape_err!("bcontract: {batch}×{a} against {batch2}×{ab}"));
        }
        let b = ab / a;
        let out = bcontract(self.value(v).data(), self.value(g).data(), batch, a, b);
        Ok(self.push(Op::BContract(v, g), DenseTensor::from_parts(vec![batch, b], out)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        Ok(self.push(Op::Reshape(x), v))
    }

    /// Concatenates `m × n_i` matrices along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols needs at least one part".into()))?;
        let m = matrix_dims(self.value(*first), "concat_cols")?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (rows, cols) = matrix_dims(self.value(p), "concat_cols")?;
            if rows != m {
                return Err(shape_err!("concat_cols row counts differ: {m} vs {rows}"));
            }
            widths.push(cols);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), DenseTensor::from_parts(vec![m, total], data)))
    }

    /// Column `col` of a `m × n` matrix as `m × 1`.
    pub fn column(&mut self, x: Var, col: usize) -> Result<Var> {
        let (m, n) = matrix_dims(self.value(x), "column")?;
        if col >= n {
            return Err(shape_err!("column {col} out of range for {m}×{n}"));
        }
        let data = (0..m).map(|i| self.value(x).data()[i * n + col]).collect();
        Ok(self.push(Op::Column(x, col), DenseTensor::from_parts(vec![m, 1], data)))
    }

    /// Rows of a matrix selected by index (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (m, n) = matrix_dims(self.value(x), "gather_rows")?;
        if rows.is_empty() {
            return Err(shape_err!("gather_rows needs at least one index"));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if r >= m {
                return Err(shape_err!("row {r} out of range for {m}×{n}"));
            }
            data.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        Ok(self.push(
            Op::GatherRows(x, rows.to_vec()),
            DenseTensor::from_parts(vec![rows.len(), n], data),
        ))
    }

    /// Reverse sweep from a scalar node; returns adjoints of every node.
    pub fn adjoints(&self, loss: Var) -> Result<Adjoints> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let count = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; count];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..count).rev() {
            let (before, rest) = grads.split_at_mut(i);
            let Some(g) = rest[0].as_ref() else { continue };
            self.propagate(i, g, before);
        }
        Ok(Adjoints {
            grads,
            shapes: self.nodes[..count].iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Reverse sweep from `loss`, accumulating into parameter gradients.
    /// Parameters that do not reach the loss are left untouched.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let adj = self.adjoints(loss)?;
        for (i, node) in self.nodes[..adj.grads.len()].iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &adj.grads[i]) {
                let p = store.get_mut(*id);
                if p.grad.len() != g.len() {
                    return Err(shape_err!("parameter {} changed shape since the forward pass", p.name));
                }
                for (acc, v) in p.grad.data_mut().iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                // dA += G·Bᵀ, dB += Aᵀ·G
                gemm(false, true, m, n, k, g, vb.data(), slot(grads, *a, m * k), true);
                gemm(true, false, k, m, n, va.data(), g, slot(grads, *b, k * n), true);
            }
            Op::Add(a, b) => {
                axpy(slot(grads, *a, g.len()), 1.0, g);
                axpy(slot(grads, *b, g.len()), 1.0, g);
            }
            Op::Sub(a, b) => {
                axpy(slot(grads, *a, g.len()), 1.0, g);
                axpy(slot(grads, *b, g.len()), -1.0, g);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                for ((d, &gv), &y) in slot(grads, *a, g.len()).iter_mut().zip(g).zip(vb) {
                    *d += gv * y;
                }
                for ((d, &gv), &x) in slot(grads, *b, g.len()).iter_mut().zip(g).zip(va) {
                    *d += gv * x;
                }
            }
            Op::Scale(a, alpha) => axpy(slot(grads, *a, g.len()), *alpha, g),
            Op::AddBias(x, bias) => {
                axpy(slot(grads, *x, g.len()), 1.0, g);
                let n = self.value(*bias).len();
                let db = slot(grads, *bias, n);
                for row in g.chunks_exact(n) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
            }
            Op::Act(x, kind, order) => {
                let vx = self.value(*x).data();
                for ((d, &gv), &z) in slot(grads, *x, g.len()).iter_mut().zip(g).zip(vx) {
                    *d += gv * kind.derivative(order + 1, z);
                }
            }
            Op::Square(x) => {
                let vx = self.value(*x).data();
                for ((d, &gv), &z) in slot(grads, *x, g.len()).iter_mut().zip(g).zip(vx) {
                    *d += 2.0 * gv * z;
                }
            }
            Op::Abs(x) => {
                let vx = self.value(*x).data();
                for ((d, &gv), &z) in slot(grads, *x, g.len()).iter_mut().zip(g).zip(vx) {
                    if z > 0.0 {
                        *d += gv;
                    } else if z < 0.0 {
                        *d -= gv;
                    }
                }
            }
            Op::Sqrt(x) => {
                let out = node.value.data();
                for ((d, &gv), &s) in slot(grads, *x, g.len()).iter_mut().zip(g).zip(out) {
                    if s > 0.0 {
                        *d += 0.5 * gv / s;
                    }
                }
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                slot(grads, *x, n).iter_mut().for_each(|d| *d += g[0]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                let s = g[0] / n as f64;
                slot(grads, *x, n).iter_mut().for_each(|d| *d += s);
            }
            Op::RowKron(a, z) => {
                let (n, r) = (self.shape(*a)[0], self.shape(*a)[1]);
                let p = self.shape(*z)[1];
                let (va, vz) = (self.value(*a).data(), self.value(*z).data());
                rowkron_backward(va, vz, g, n, r, p, Some(slot(grads, *a, n * r)), None);
                rowkron_backward(va, vz, g, n, r, p, None, Some(slot(grads, *z, r * p)));
            }
            Op::Swap01(x) => {
                let s = node.value.shape();
                // output is [b, a, c]; swapping back gives the input layout
                let back = swap01(g, s[0], s[1], s[2]);
                axpy(slot(grads, *x, g.len()), 1.0, &back);
            }
            Op::Transpose(x) => {
                let s = node.value.shape();
                let back = transpose(g, s[0], s[1]);
                axpy(slot(grads, *x, g.len()), 1.0, &back);
            }
            Op::BContract(v, m) => {
                let (batch, a) = (self.shape(*v)[0], self.shape(*v)[1]);
                let b = self.shape(*m)[1] / a;
                let (vv, vm) = (self.value(*v).data(), self.value(*m).data());
                bcontract_backward(vv, vm, g, batch, a, b, Some(slot(grads, *v, batch * a)), None);
                bcontract_backward(vv, vm, g, batch, a, b, None, Some(slot(grads, *m, batch * a * b)));
            }
            Op::Reshape(x) => axpy(slot(grads, *x, g.len()), 1.0, g),
            Op::ConcatCols(parts) => {
                let total = node.value.shape()[1];
                let m = node.value.shape()[0];
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    let d = slot(grads, p, m * w);
                    for i in 0..m {
                        for j in 0..w {
                            d[i * w + j] += g[i * total + offset + j];
                        }
                    }
                    offset += w;
                }
            }
            Op::Column(x, col) => {
                let (m, n) = (self.shape(*x)[0], self.shape(*x)[1]);
                let d = slot(grads, *x, m * n);
                for i in 0..m {
                    d[i * n + col] += g[i];
                }
            }
            Op::GatherRows(x, rows) => {
                let (m, n) = (self.shape(*x)[0], self.shape(*x)[1]);
                let d = slot(grads, *x, m * n);
                for (k, &r) in rows.iter().enumerate() {
                    for j in 0..n {
                        d[r * n + j] += g[k * n + j];
                    }
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}
