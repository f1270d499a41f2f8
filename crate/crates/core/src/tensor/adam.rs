use super::param::{ParamStore, Parameter};
use crate::scalar::Scalar;

/// Adam with bias correction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// Applies one update using `param.grad`, then clears the gradient.
    pub fn update<T: Scalar>(&self, param: &mut Parameter<T>) {
        param.step += 1;
        let t = param.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() - T::of(self.beta1.powi(t));
        let c2 = T::one() - T::of(self.beta2.powi(t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let value = param.value.data_mut();
        let (m, v) = (param.m.data_mut(), param.v.data_mut());
        for (i, g) in param.grad.data_mut().iter_mut().enumerate() {
            m[i] = b1 * m[i] + (T::one() - b1) * *g;
            v[i] = b2 * v[i] + (T::one() - b2) * *g * *g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
            *g = T::zero();
        }
    }

    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) {
        for p in store.iter_mut() {
            self.update(p);
        }
    }
}
