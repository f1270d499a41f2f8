//! Reverse-mode differentiation on a per-example tape.
//!
//! A [`Graph`] borrows a frozen [`ParamStore`]; ops record their inputs and
//! whatever forward state their backward rule needs. [`Graph::backward`]
//! sweeps the tape once and writes parameter gradients into a separate
//! [`Grads`] buffer, so any number of graphs can read the same store.

use super::gru::{self, GruCache, GruLayer};
use super::param::{Grads, ParamId, ParamStore};
use super::{kernels, sigmoid, softplus, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Input,
    Param(ParamId),
    Embed {
        table: ParamId,
        bags: Vec<Vec<usize>>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var, Var),
    MulScalar(Var, Var),
    Affine(Var, T),
    Concat(Vec<Var>),
    ConcatCols(Var, Var),
    Row(Var, usize),
    Slice(Var, usize, usize),
    MatMul(Var, Var),
    MatVec(Var, Var),
    MatVecT(Var, Var),
    Dot(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    GroupSum(Var, Vec<Vec<usize>>),
    Normalize(Var),
    Max(Var, usize),
    RowNormalize(Var, Vec<T>),
    PowSum(Var, u32),
    RowSum(Var),
    ColSum(Var),
    NegLogFloor(Var, T),
    BceLogits(Var, T),
    Gru(Box<GruNode<T>>),
}

struct GruNode<T> {
    layer: GruLayer,
    input: Var,
    cache: GruCache<T>,
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

/// Adjoints of every node after a backward sweep.
pub struct Adjoints<T> {
    adj: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Adjoints<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.adj[v.0].as_ref()
    }
}

fn mismatch(op: &'static str, a: &Tensor<impl Scalar>, b: &Tensor<impl Scalar>) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn slot<'a, T: Scalar>(
    adj: &'a mut [Option<Tensor<T>>],
    nodes: &[Node<T>],
    v: Var,
) -> &'a mut Tensor<T> {
    adj[v.0].get_or_insert_with(|| Tensor::zeros(nodes[v.0].value.shape()))
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
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

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input)
    }

    pub fn constant(&mut self, x: T) -> Var {
        self.input(Tensor::scalar(x))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.value(id).clone();
        self.push(value, Op::Param(id))
    }

    /// Row `r` of the result is the sum of the table rows listed in `bags[r]`;
    /// an empty bag gives a zero row.
    pub fn embed(&mut self, table: ParamId, bags: Vec<Vec<usize>>) -> Result<Var> {
        let t = self.params.value(table);
        if t.ndim() != 2 {
            return Err(Error::invalid(format!(
                "embedding table must be a matrix, got {:?}",
                t.shape()
            )));
        }
        let (rows, dim) = (t.rows(), t.cols());
        let mut out = Tensor::zeros(&[bags.len(), dim]);
        for (r, bag) in bags.iter().enumerate() {
            for &id in bag {
                if id >= rows {
                    return Err(Error::invalid(format!(
                        "embedding id {id} out of range for table with {rows} rows"
                    )));
                }
                kernels::axpy(out.row_mut(r), T::one(), t.row(id));
            }
        }
        Ok(self.push(out, Op::Embed { table, bags }))
    }

    pub fn embed_ids(&mut self, table: ParamId, ids: &[usize]) -> Result<Var> {
        self.embed(table, ids.iter().map(|&i| vec![i]).collect())
    }

    fn zip_with(
        &self,
        a: Var,
        b: Var,
        op: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(op, x, y));
        }
        Tensor::new(
            x.shape().to_vec(),
            x.data()
                .iter()
                .zip(y.data())
                .map(|(&p, &q)| f(p, q))
                .collect(),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "add", |p, q| p + q)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "sub", |p, q| p - q)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with(a, b, "mul", |p, q| p * q)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    fn expect_scalar(&self, s: Var, op: &'static str) -> Result<T> {
        let t = self.value(s);
        if t.len() != 1 {
            return Err(Error::ShapeMismatch {
                op,
                left: t.shape().to_vec(),
                right: vec![1],
            });
        }
        Ok(t.item())
    }

    /// `x + s` with a one-element `s` broadcast over `x`.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let c = self.expect_scalar(s, "add_scalar")?;
        let v = self.value(x).map(|e| e + c);
        Ok(self.push(v, Op::AddScalar(x, s)))
    }

    /// `s * x` with a one-element `s` broadcast over `x`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let c = self.expect_scalar(s, "mul_scalar")?;
        let v = self.value(x).map(|e| e * c);
        Ok(self.push(v, Op::MulScalar(x, s)))
    }

    /// `a * x + c` for constants `a`, `c`.
    pub fn affine(&mut self, x: Var, a: T, c: T) -> Var {
        let v = self.value(x).map(|e| a * e + c);
        self.push(v, Op::Affine(x, a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat(&tensors)?;
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    /// Side-by-side concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ndim() != 2 || y.ndim() != 2 || x.rows() != y.rows() {
            return Err(mismatch("concat_cols", x, y));
        }
        let (ca, cb) = (x.cols(), y.cols());
        let mut data = Vec::with_capacity(x.len() + y.len());
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let v = Tensor::matrix(x.rows(), ca + cb, data)?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    pub fn row(&mut self, m: Var, i: usize) -> Result<Var> {
        let t = self.value(m);
        if t.ndim() != 2 || i >= t.rows() {
            return Err(Error::invalid(format!(
                "row {i} out of range for shape {:?}",
                t.shape()
            )));
        }
        let v = Tensor::vector(t.row(i).to_vec());
        Ok(self.push(v, Op::Row(m, i)))
    }

    /// Rows `start..start+len` of a matrix, or elements of a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let v = match t.ndim() {
            1 if start + len <= t.len() => Tensor::vector(t.data()[start..start + len].to_vec()),
            2 if start + len <= t.rows() => {
                let c = t.cols();
                Tensor::matrix(len, c, t.data()[start * c..(start + len) * c].to_vec())?
            }
            _ => {
                return Err(Error::invalid(format!(
                    "slice {start}..{} out of range for shape {:?}",
                    start + len,
                    t.shape()
                )))
            }
        };
        Ok(self.push(v, Op::Slice(x, start, len)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ndim() != 2 || y.ndim() != 2 {
            return Err(mismatch("matmul", x, y));
        }
        let v = x.matmul(y)?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `M x` for a matrix `M` and vector `x`.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (mt, xt) = (self.value(m), self.value(x));
        if mt.ndim() != 2 || xt.ndim() != 1 || mt.cols() != xt.len() {
            return Err(mismatch("matvec", mt, xt));
        }
        let mut out = vec![T::zero(); mt.rows()];
        kernels::matvec(mt.data(), mt.cols(), xt.data(), &mut out);
        Ok(self.push(Tensor::vector(out), Op::MatVec(m, x)))
    }

    /// `M^T x` for a matrix `M` and vector `x`.
    pub fn matvec_t(&mut self, m: Var, x: Var) -> Result<Var> {
        let (mt, xt) = (self.value(m), self.value(x));
        if mt.ndim() != 2 || xt.ndim() != 1 || mt.rows() != xt.len() {
            return Err(mismatch("matvec_t", mt, xt));
        }
        let mut out = vec![T::zero(); mt.cols()];
        kernels::matvec_t_acc(mt.data(), mt.cols(), xt.data(), &mut out);
        Ok(self.push(Tensor::vector(out), Op::MatVecT(m, x)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ndim() != 1 || x.shape() != y.shape() {
            return Err(mismatch("dot", x, y));
        }
        let v = Tensor::scalar(kernels::dot(x.data(), y.data()));
        Ok(self.push(v, Op::Dot(a, b)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).map(T::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).softmax()?;
        Ok(self.push(v, Op::Softmax(x)))
    }

    /// `out[g] = sum of x[i] for i in groups[g]`.
    pub fn group_sum(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Result<Var> {
        let t = self.value(x);
        if t.ndim() != 1 {
            return Err(Error::invalid(format!(
                "group_sum needs a vector, got {:?}",
                t.shape()
            )));
        }
        let mut out = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut s = T::zero();
            for &i in g {
                s = s + *t.data().get(i).ok_or_else(|| {
                    Error::invalid(format!("group index {i} out of range {}", t.len()))
                })?;
            }
            out.push(s);
        }
        Ok(self.push(Tensor::vector(out), Op::GroupSum(x, groups)))
    }

    /// `x / sum(x)` for a vector with a positive total.
    pub fn normalize(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let total: T = t.data().iter().copied().sum();
        if t.ndim() != 1 || !(total > T::zero()) {
            return Err(Error::invalid("normalize needs a vector with positive sum"));
        }
        let v = t.map(|e| e / total);
        Ok(self.push(v, Op::Normalize(x)))
    }

    /// Maximum element; the gradient flows to the first maximizer.
    pub fn max(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(Error::invalid("max of an empty tensor"));
        }
        let mut best = 0;
        for (i, &e) in t.data().iter().enumerate() {
            if e > t.data()[best] {
                best = i;
            }
        }
        let v = Tensor::scalar(t.data()[best]);
        Ok(self.push(v, Op::Max(x, best)))
    }

    /// L2-normalizes each row (a vector is one row). Zero rows stay zero.
    pub fn row_normalize(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut out = t.clone();
        let mut norms = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let n = kernels::dot(t.row(r), t.row(r)).sqrt();
            norms.push(n);
            let row = out.row_mut(r);
            if n > T::zero() {
                row.iter_mut().for_each(|e| *e = *e / n);
            } else {
                row.iter_mut().for_each(|e| *e = T::zero());
            }
        }
        self.push(out, Op::RowNormalize(x, norms))
    }

    /// `sum_i x_i^p`.
    pub fn pow_sum(&mut self, x: Var, p: u32) -> Result<Var> {
        if p == 0 {
            return Err(Error::invalid("exponent must be positive"));
        }
        // ascending order makes the sum independent of element order
        let mut terms: Vec<T> = self
            .value(x)
            .data()
            .iter()
            .map(|e| e.powi(p as i32))
            .collect();
        terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let s: T = terms.into_iter().fold(T::zero(), |acc, t| acc + t);
        Ok(self.push(Tensor::scalar(s), Op::PowSum(x, p)))
    }

    pub fn rowsum(&mut self, m: Var) -> Result<Var> {
        let v = self.value(m).rowsum()?;
        Ok(self.push(v, Op::RowSum(m)))
    }

    pub fn colsum(&mut self, m: Var) -> Result<Var> {
        let v = self.value(m).colsum()?;
        Ok(self.push(v, Op::ColSum(m)))
    }

    /// `-ln(max(x, floor))` on a one-element input; no gradient below the floor.
    pub fn neg_log_floor(&mut self, x: Var, floor: T) -> Result<Var> {
        let e = self.expect_scalar(x, "neg_log_floor")?;
        let v = Tensor::scalar(-(e.max(floor)).ln());
        Ok(self.push(v, Op::NegLogFloor(x, floor)))
    }

    /// Binary cross entropy of `sigmoid(z)` against `target`, from the logit.
    pub fn bce_with_logits(&mut self, z: Var, target: T) -> Result<Var> {
        let e = self.expect_scalar(z, "bce_with_logits")?;
        let v = Tensor::scalar(softplus(e) - target * e);
        Ok(self.push(v, Op::BceLogits(z, target)))
    }

    /// Runs a GRU over the rows of `xs` (forward or reversed order); row `i`
    /// of the result is the state after consuming position `i`.
    pub fn gru(&mut self, layer: &GruLayer, xs: Var, reverse: bool) -> Result<Var> {
        let (h, cache) = gru::fused_forward(self.params, layer, self.value(xs), reverse)?;
        Ok(self.push(
            h,
            Op::Gru(Box::new(GruNode {
                layer: *layer,
                input: xs,
                cache,
            })),
        ))
    }

    /// Backpropagates from a one-element `root`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, root: Var, grads: &mut Grads<T>) -> Result<Adjoints<T>> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::invalid(format!(
                "backward root must have one element, got {:?}",
                root_value.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        adj.resize_with(self.nodes.len(), || None);
        adj[root.0] = Some(Tensor::new(root_value.shape().to_vec(), vec![T::one()])?);

        for i in (0..=root.0).rev() {
            let (before, rest) = adj.split_at_mut(i);
            let Some(d) = rest[0].as_ref() else { continue };
            let node = &self.nodes[i];
            macro_rules! acc {
                ($v:expr) => {
                    slot(&mut *before, &self.nodes, $v)
                };
            }
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    kernels::axpy(grads.block_mut(*id).data_mut(), T::one(), d.data());
                }
                Op::Embed { table, bags } => {
                    let g = grads.block_mut(*table);
                    for (r, bag) in bags.iter().enumerate() {
                        for &id in bag {
                            kernels::axpy(g.row_mut(id), T::one(), d.row(r));
                        }
                    }
                }
                Op::Add(a, b) => {
                    kernels::axpy(acc!(*a).data_mut(), T::one(), d.data());
                    kernels::axpy(acc!(*b).data_mut(), T::one(), d.data());
                }
                Op::Sub(a, b) => {
                    kernels::axpy(acc!(*a).data_mut(), T::one(), d.data());
                    kernels::axpy(acc!(*b).data_mut(), -T::one(), d.data());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    for ((g, &dd), &y) in
                        acc!(*a).data_mut().iter_mut().zip(d.data()).zip(vb.data())
                    {
                        *g = *g + dd * y;
                    }
                    for ((g, &dd), &x) in
                        acc!(*b).data_mut().iter_mut().zip(d.data()).zip(va.data())
                    {
                        *g = *g + dd * x;
                    }
                }
                Op::AddScalar(x, s) => {
                    kernels::axpy(acc!(*x).data_mut(), T::one(), d.data());
                    let total: T = d.data().iter().copied().sum();
                    let gs = acc!(*s);
                    gs.data_mut()[0] = gs.data()[0] + total;
                }
                Op::MulScalar(x, s) => {
                    let c = self.value(*s).item();
                    kernels::axpy(acc!(*x).data_mut(), c, d.data());
                    let total = kernels::dot(d.data(), self.value(*x).data());
                    let gs = acc!(*s);
                    gs.data_mut()[0] = gs.data()[0] + total;
                }
                Op::Affine(x, a) => {
                    kernels::axpy(acc!(*x).data_mut(), *a, d.data());
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        kernels::axpy(acc!(p).data_mut(), T::one(), &d.data()[off..off + n]);
                        off += n;
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols();
                    let rows = d.rows();
                    {
                        let ga = acc!(*a);
                        for r in 0..rows {
                            kernels::axpy(ga.row_mut(r), T::one(), &d.row(r)[..ca]);
                        }
                    }
                    let gb = acc!(*b);
                    for r in 0..rows {
                        kernels::axpy(gb.row_mut(r), T::one(), &d.row(r)[ca..]);
                    }
                }
                Op::Row(m, r) => {
                    kernels::axpy(acc!(*m).row_mut(*r), T::one(), d.data());
                }
                Op::Slice(x, start, len) => {
                    let cols = self.value(*x).cols();
                    let width = if self.value(*x).ndim() == 1 { 1 } else { cols };
                    let g = acc!(*x);
                    kernels::axpy(
                        &mut g.data_mut()[start * width..(start + len) * width],
                        T::one(),
                        d.data(),
                    );
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let da = d.matmul(&vb.transpose()?)?;
                    let db = va.transpose()?.matmul(d)?;
                    acc!(*a).add_assign(&da)?;
                    acc!(*b).add_assign(&db)?;
                }
                Op::MatVec(m, x) => {
                    let (vm, vx) = (self.value(*m), self.value(*x));
                    kernels::outer_acc(acc!(*m).data_mut(), d.data(), vx.data());
                    kernels::matvec_t_acc(vm.data(), vm.cols(), d.data(), acc!(*x).data_mut());
                }
                Op::MatVecT(m, x) => {
                    let (vm, vx) = (self.value(*m), self.value(*x));
                    kernels::outer_acc(acc!(*m).data_mut(), vx.data(), d.data());
                    let gx = acc!(*x);
                    for (r, g) in gx.data_mut().iter_mut().enumerate() {
                        *g = *g + kernels::dot(vm.row(r), d.data());
                    }
                }
                Op::Dot(a, b) => {
                    let s = d.item();
                    let (va, vb) = (self.value(*a), self.value(*b));
                    kernels::axpy(acc!(*a).data_mut(), s, vb.data());
                    kernels::axpy(acc!(*b).data_mut(), s, va.data());
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    for ((g, &dd), &yy) in
                        acc!(*x).data_mut().iter_mut().zip(d.data()).zip(y.data())
                    {
                        *g = *g + dd * yy * (T::one() - yy);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    for ((g, &dd), &yy) in
                        acc!(*x).data_mut().iter_mut().zip(d.data()).zip(y.data())
                    {
                        *g = *g + dd * (T::one() - yy * yy);
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let inner = kernels::dot(d.data(), y.data());
                    for ((g, &dd), &yy) in
                        acc!(*x).data_mut().iter_mut().zip(d.data()).zip(y.data())
                    {
                        *g = *g + yy * (dd - inner);
                    }
                }
                Op::GroupSum(x, groups) => {
                    let g = acc!(*x);
                    for (k, grp) in groups.iter().enumerate() {
                        for &i in grp {
                            g.data_mut()[i] = g.data()[i] + d.data()[k];
                        }
                    }
                }
                Op::Normalize(x) => {
                    let total: T = self.value(*x).data().iter().copied().sum();
                    let inner = kernels::dot(d.data(), node.value.data());
                    for (g, &dd) in acc!(*x).data_mut().iter_mut().zip(d.data()) {
                        *g = *g + (dd - inner) / total;
                    }
                }
                Op::Max(x, k) => {
                    let g = acc!(*x);
                    g.data_mut()[*k] = g.data()[*k] + d.item();
                }
                Op::RowNormalize(x, norms) => {
                    let y = &node.value;
                    let g = acc!(*x);
                    for (r, &n) in norms.iter().enumerate() {
                        if n > T::zero() {
                            let inner = kernels::dot(d.row(r), y.row(r));
                            for ((gg, &dd), &yy) in
                                g.row_mut(r).iter_mut().zip(d.row(r)).zip(y.row(r))
                            {
                                *gg = *gg + (dd - yy * inner) / n;
                            }
                        }
                    }
                }
                Op::PowSum(x, p) => {
                    let s = d.item();
                    let pf = T::of(f64::from(*p));
                    let vx = self.value(*x);
                    for (g, &e) in acc!(*x).data_mut().iter_mut().zip(vx.data()) {
                        *g = *g + s * pf * e.powi(*p as i32 - 1);
                    }
                }
                Op::RowSum(m) => {
                    let g = acc!(*m);
                    for r in 0..g.rows() {
                        let dr = d.data()[r];
                        g.row_mut(r).iter_mut().for_each(|e| *e = *e + dr);
                    }
                }
                Op::ColSum(m) => {
                    let g = acc!(*m);
                    for r in 0..g.rows() {
                        kernels::axpy(g.row_mut(r), T::one(), d.data());
                    }
                }
                Op::NegLogFloor(x, floor) => {
                    let e = self.value(*x).item();
                    if e > *floor {
                        let g = acc!(*x);
                        g.data_mut()[0] = g.data()[0] - d.item() / e;
                    }
                }
                Op::BceLogits(z, target) => {
                    let e = self.value(*z).item();
                    let g = acc!(*z);
                    g.data_mut()[0] = g.data()[0] + d.item() * (sigmoid(e) - *target);
                }
                Op::Gru(n) => {
                    let xs = self.value(n.input);
                    let mut dx = Tensor::zeros_like(xs);
                    gru::fused_backward(self.params, &n.layer, xs, &n.cache, d, grads, &mut dx)?;
                    acc!(n.input).add_assign(&dx)?;
                }
            }
        }
        Ok(Adjoints { adj })
    }
}
