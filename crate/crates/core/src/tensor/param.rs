use rand::Rng;

use super::{kernels, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable block with its gradient accumulator and Adam state.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
    pub step: u64,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            grad: Tensor::zeros_like(&value),
            m: Tensor::zeros_like(&value),
            v: Tensor::zeros_like(&value),
            value,
            step: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.find(&name).is_some() {
            return Err(Error::invalid(format!("duplicate parameter name {name}")));
        }
        self.params.push(Parameter::new(name, value));
        Ok(ParamId(self.params.len() - 1))
    }

    /// Adds a block initialized uniformly in `[-bound, bound]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::of(rng.gen_range(-bound..=bound)))
            .collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
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

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
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

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds `scale * grads` into each parameter's accumulator.
    pub fn accumulate(&mut self, grads: &Grads<T>, scale: T) -> Result<()> {
        if grads.blocks.len() != self.params.len() {
            return Err(Error::invalid(
                "gradient set does not match parameter store",
            ));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.blocks) {
            if let Some(g) = g {
                kernels::axpy(p.grad.data_mut(), scale, g.data());
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// Values only, for early-stopping snapshots.
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) -> Result<()> {
        if snapshot.len() != self.params.len() {
            return Err(Error::invalid("snapshot does not match parameter store"));
        }
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            if p.value.shape() != s.shape() {
                return Err(Error::ShapeMismatch {
                    op: "restore",
                    left: p.value.shape().to_vec(),
                    right: s.shape().to_vec(),
                });
            }
            p.value = s.clone();
        }
        Ok(())
    }
}

/// Sparse-by-block gradient buffer aligned with a [`ParamStore`].
///
/// Blocks that received no gradient stay `None`.
#[derive(Clone, Debug)]
pub struct Grads<T> {
    pub(crate) blocks: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Grads<T> {
    pub fn for_store(store: &ParamStore<T>) -> Self {
        Grads {
            blocks: vec![None; store.len()],
            shapes: store.iter().map(|p| p.value.shape().to_vec()).collect(),
        }
    }

    pub fn block(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.blocks[id.0].as_ref()
    }

    /// Mutable access, allocating a zero block on first touch.
    pub fn block_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        let shape = &self.shapes[id.0];
        self.blocks[id.0].get_or_insert_with(|| Tensor::zeros(shape))
    }

    pub fn add_assign(&mut self, other: &Grads<T>) -> Result<()> {
        if other.blocks.len() != self.blocks.len() {
            return Err(Error::invalid("gradient sets differ in size"));
        }
        for (i, g) in other.blocks.iter().enumerate() {
            if let Some(g) = g {
                match &mut self.blocks[i] {
                    Some(mine) => mine.add_assign(g)?,
                    slot @ None => *slot = Some(g.clone()),
                }
            }
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.blocks.iter_mut().for_each(|b| *b = None);
    }

    pub fn norm(&self) -> T {
        self.blocks
            .iter()
            .flatten()
            .map(|b| kernels::dot(b.data(), b.data()))
            .sum::<T>()
            .sqrt()
    }

    /// Dense view of one block (zeros where nothing flowed).
    pub fn dense(&self, id: ParamId) -> Tensor<T> {
        self.blocks[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[id.0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_start_at_zero_and_names_are_unique() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = crate::rng::stream(1, crate::rng::INIT, 0);
        let id = store.add_uniform("w", &[3, 2], 0.05, &mut rng).unwrap();
        let p = store.get(id);
        assert_eq!(p.grad.shape(), p.value.shape());
        assert!(p.m.data().iter().chain(p.v.data()).all(|&x| x == 0.0));
        assert!(p.value.data().iter().all(|x| x.abs() <= 0.05));
        assert!(store.add_zeros("w", &[1]).is_err());
    }

    #[test]
    fn grads_accumulate_and_snapshot_restores() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add_zeros("a", &[2]).unwrap();
        let mut g = Grads::for_store(&store);
        g.block_mut(a).data_mut()[1] = 2.0;
        let mut h = Grads::for_store(&store);
        h.add_assign(&g).unwrap();
        h.add_assign(&g).unwrap();
        store.accumulate(&h, 0.5).unwrap();
        assert_eq!(store.get(a).grad.data(), &[0.0, 2.0]);
        let snap = store.snapshot();
        store.value_mut(a).data_mut()[0] = 9.0;
        store.restore(&snap).unwrap();
        assert_eq!(store.value(a).data(), &[0.0, 0.0]);
    }
}
