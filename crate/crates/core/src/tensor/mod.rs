//! Dense row-major tensors, a reverse-mode tape, GRU layers and Adam.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod gru;
pub(crate) mod kernels;
pub mod param;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, BlockReport, GradCheckReport};
pub use graph::{Graph, Var};
pub use gru::{BiGru, BiGruOutput, GruLayer};
pub use param::{Grads, ParamId, ParamStore, Parameter};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn zeros_like(other: &Tensor<T>) -> Self {
        Self::zeros(&other.shape)
    }

    /// A one-element vector; scalars are carried with shape `[1]`.
    pub fn scalar(x: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![x],
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Row count of a matrix; a vector counts as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            _ => self.data.len(),
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn into_shape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "add",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "add_assign",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        kernels::axpy(&mut self.data, T::one(), &other.data);
        Ok(())
    }

    pub fn scale(&mut self, c: T) {
        self.data.iter_mut().for_each(|x| *x = *x * c);
    }

    /// Matrix product of two matrices (a vector on the right is a column).
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Self> {
        if self.ndim() != 2 || other.ndim() > 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (n, k) = (self.shape[0], self.shape[1]);
        let m = if other.ndim() == 2 { other.shape[1] } else { 1 };
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                kernels::axpy(
                    out_row,
                    self.data[i * k + p],
                    &other.data[p * m..(p + 1) * m],
                );
            }
        }
        let shape = if other.ndim() == 2 {
            vec![n, m]
        } else {
            vec![n]
        };
        Tensor::new(shape, out)
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(Error::invalid(format!(
                "transpose needs a matrix, got {:?}",
                self.shape
            )));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::new(vec![c, r], out)
    }

    /// Concatenates vectors end to end.
    pub fn concat(parts: &[&Tensor<T>]) -> Result<Self> {
        if let Some(bad) = parts.iter().find(|p| p.ndim() != 1) {
            return Err(Error::ShapeMismatch {
                op: "concat",
                left: bad.shape.clone(),
                right: vec![],
            });
        }
        Ok(Tensor::vector(
            parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
        ))
    }

    /// Per-row totals of a matrix.
    pub fn rowsum(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(Error::invalid(format!(
                "rowsum needs a matrix, got {:?}",
                self.shape
            )));
        }
        Ok(Tensor::vector(
            (0..self.rows())
                .map(|i| self.row(i).iter().copied().sum())
                .collect(),
        ))
    }

    /// Sum of a matrix's rows (a vector of column totals).
    pub fn colsum(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(Error::invalid(format!(
                "colsum needs a matrix, got {:?}",
                self.shape
            )));
        }
        let mut out = vec![T::zero(); self.cols()];
        for i in 0..self.rows() {
            kernels::axpy(&mut out, T::one(), self.row(i));
        }
        Ok(Tensor::vector(out))
    }

    pub fn softmax(&self) -> Result<Self> {
        if self.ndim() != 1 || self.is_empty() {
            return Err(Error::invalid(format!(
                "softmax needs a non-empty vector, got {:?}",
                self.shape
            )));
        }
        Ok(Tensor::vector(softmax(&self.data)))
    }
}

/// Numerically stable softmax (max-subtracted). Empty input gives empty output.
pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
