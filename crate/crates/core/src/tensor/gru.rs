//! Gated recurrent units.
//!
//! Gate equations (weights stacked as `[update; reset; candidate]`):
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r * h) + b_n)
//! h' = z * h + (1 - z) * n
//! ```
//!
//! [`GruLayer::step`] builds one step from primitive graph ops and serves as
//! the reference; [`Graph::gru`] runs a whole sequence as a single fused node
//! with hand-written backpropagation through time.

use rand::Rng;

use super::graph::{Graph, Var};
use super::param::{Grads, ParamStore};
use super::{kernels, sigmoid, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `3h x input`
    pub w_input: super::ParamId,
    /// `3h x h`
    pub w_hidden: super::ParamId,
    /// `3h`
    pub bias: super::ParamId,
}

impl GruLayer {
    /// Registers the layer's blocks under `name`; matrices are drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at zero.
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if input_size == 0 || hidden_size == 0 {
            return Err(Error::invalid("GRU sizes must be positive"));
        }
        let h3 = 3 * hidden_size;
        let w_input = store.add_uniform(
            format!("{name}.w_input"),
            &[h3, input_size],
            1.0 / (input_size as f64).sqrt(),
            rng,
        )?;
        let w_hidden = store.add_uniform(
            format!("{name}.w_hidden"),
            &[h3, hidden_size],
            1.0 / (hidden_size as f64).sqrt(),
            rng,
        )?;
        let bias = store.add_zeros(format!("{name}.bias"), &[h3])?;
        Ok(GruLayer {
            input_size,
            hidden_size,
            w_input,
            w_hidden,
            bias,
        })
    }

    /// Rebinds a layer to blocks that already exist in `store`.
    pub fn bind<T: Scalar>(store: &ParamStore<T>, name: &str) -> Result<Self> {
        let find = |suffix: &str| {
            store
                .find(&format!("{name}.{suffix}"))
                .ok_or_else(|| Error::invalid(format!("missing parameter {name}.{suffix}")))
        };
        let (w_input, w_hidden, bias) = (find("w_input")?, find("w_hidden")?, find("bias")?);
        let shape = store.value(w_input).shape();
        let layer = GruLayer {
            input_size: shape[1],
            hidden_size: shape[0] / 3,
            w_input,
            w_hidden,
            bias,
        };
        layer.validate(store)?;
        Ok(layer)
    }

    fn validate<T: Scalar>(&self, store: &ParamStore<T>) -> Result<()> {
        let h3 = 3 * self.hidden_size;
        let checks = [
            (self.w_input, vec![h3, self.input_size]),
            (self.w_hidden, vec![h3, self.hidden_size]),
            (self.bias, vec![h3]),
        ];
        for (id, shape) in checks {
            if store.value(id).shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "gru",
                    left: store.value(id).shape().to_vec(),
                    right: shape,
                });
            }
        }
        Ok(())
    }

    /// One differentiable step built from primitive ops.
    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, h_prev: Var, x: Var) -> Result<Var> {
        let h = self.hidden_size;
        if g.value(x).shape() != [self.input_size] || g.value(h_prev).shape() != [h] {
            return Err(Error::ShapeMismatch {
                op: "gru_step",
                left: g.value(x).shape().to_vec(),
                right: g.value(h_prev).shape().to_vec(),
            });
        }
        let w = g.param(self.w_input);
        let u = g.param(self.w_hidden);
        let b = g.param(self.bias);
        let wx = g.matvec(w, x)?;
        let wx = g.add(wx, b)?;
        let (wz, wr, wn) = (
            g.slice(wx, 0, h)?,
            g.slice(wx, h, h)?,
            g.slice(wx, 2 * h, h)?,
        );
        let (uz, ur, un) = (g.slice(u, 0, h)?, g.slice(u, h, h)?, g.slice(u, 2 * h, h)?);
        let az = g.matvec(uz, h_prev)?;
        let az = g.add(wz, az)?;
        let z = g.sigmoid(az);
        let ar = g.matvec(ur, h_prev)?;
        let ar = g.add(wr, ar)?;
        let r = g.sigmoid(ar);
        let rh = g.mul(r, h_prev)?;
        let an = g.matvec(un, rh)?;
        let an = g.add(wn, an)?;
        let n = g.tanh(an);
        let zh = g.mul(z, h_prev)?;
        let one_minus_z = g.affine(z, -T::one(), T::one());
        let zn = g.mul(one_minus_z, n)?;
        g.add(zh, zn)
    }

    /// Plain forward step without a tape.
    pub fn step_values<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        h_prev: &[T],
        x: &[T],
    ) -> Result<Vec<T>> {
        if x.len() != self.input_size || h_prev.len() != self.hidden_size {
            return Err(Error::ShapeMismatch {
                op: "gru_step",
                left: vec![x.len()],
                right: vec![h_prev.len()],
            });
        }
        let h = self.hidden_size;
        let w = store.value(self.w_input);
        let u = store.value(self.w_hidden);
        let b = store.value(self.bias).data();
        let mut wx = vec![T::zero(); 3 * h];
        kernels::matvec(w.data(), self.input_size, x, &mut wx);
        let mut uh = vec![T::zero(); 2 * h];
        kernels::matvec(&u.data()[..2 * h * h], h, h_prev, &mut uh);
        let mut out = vec![T::zero(); h];
        let mut rh = vec![T::zero(); h];
        let mut z = vec![T::zero(); h];
        for j in 0..h {
            z[j] = sigmoid(wx[j] + b[j] + uh[j]);
            let r = sigmoid(wx[h + j] + b[h + j] + uh[h + j]);
            rh[j] = r * h_prev[j];
        }
        let mut un = vec![T::zero(); h];
        kernels::matvec(&u.data()[2 * h * h..], h, &rh, &mut un);
        for j in 0..h {
            let n = (wx[2 * h + j] + b[2 * h + j] + un[j]).tanh();
            out[j] = z[j] * h_prev[j] + (T::one() - z[j]) * n;
        }
        Ok(out)
    }
}

/// Forward state kept for backpropagation, indexed by sequence position.
pub(crate) struct GruCache<T> {
    reverse: bool,
    z: Vec<T>,
    r: Vec<T>,
    n: Vec<T>,
    h_prev: Vec<T>,
}

fn order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

pub(crate) fn fused_forward<T: Scalar>(
    store: &ParamStore<T>,
    layer: &GruLayer,
    xs: &Tensor<T>,
    reverse: bool,
) -> Result<(Tensor<T>, GruCache<T>)> {
    let (len, inp, h) = (xs.rows(), layer.input_size, layer.hidden_size);
    if xs.ndim() != 2 || xs.cols() != inp {
        return Err(Error::ShapeMismatch {
            op: "gru",
            left: xs.shape().to_vec(),
            right: vec![len, inp],
        });
    }
    if len == 0 {
        return Err(Error::invalid("GRU over an empty sequence"));
    }
    let h3 = 3 * h;
    let w = store.value(layer.w_input).data();
    let u = store.value(layer.w_hidden).data();
    let b = store.value(layer.bias).data();

    let mut pre = vec![T::zero(); len * h3];
    for row in pre.chunks_exact_mut(h3) {
        row.copy_from_slice(b);
    }
    kernels::matmul_nt_acc(xs.data(), w, inp, &mut pre);

    let mut out = vec![T::zero(); len * h];
    let mut cache = GruCache {
        reverse,
        z: vec![T::zero(); len * h],
        r: vec![T::zero(); len * h],
        n: vec![T::zero(); len * h],
        h_prev: vec![T::zero(); len * h],
    };
    let mut hidden = vec![T::zero(); h];
    let mut uh = vec![T::zero(); 2 * h];
    let mut rh = vec![T::zero(); h];
    let mut un = vec![T::zero(); h];
    for t in order(len, reverse) {
        let p = &pre[t * h3..(t + 1) * h3];
        let span = t * h..(t + 1) * h;
        cache.h_prev[span.clone()].copy_from_slice(&hidden);
        kernels::matvec(&u[..2 * h * h], h, &hidden, &mut uh);
        for j in 0..h {
            let z = sigmoid(p[j] + uh[j]);
            let r = sigmoid(p[h + j] + uh[h + j]);
            cache.z[t * h + j] = z;
            cache.r[t * h + j] = r;
            rh[j] = r * hidden[j];
        }
        kernels::matvec(&u[2 * h * h..], h, &rh, &mut un);
        for j in 0..h {
            let n = (p[2 * h + j] + un[j]).tanh();
            let z = cache.z[t * h + j];
            cache.n[t * h + j] = n;
            hidden[j] = z * hidden[j] + (T::one() - z) * n;
        }
        out[span].copy_from_slice(&hidden);
    }
    Ok((Tensor::matrix(len, h, out)?, cache))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fused_backward<T: Scalar>(
    store: &ParamStore<T>,
    layer: &GruLayer,
    xs: &Tensor<T>,
    cache: &GruCache<T>,
    d_out: &Tensor<T>,
    grads: &mut Grads<T>,
    d_xs: &mut Tensor<T>,
) -> Result<()> {
    let (len, inp, h) = (xs.rows(), layer.input_size, layer.hidden_size);
    let h3 = 3 * h;
    let u = store.value(layer.w_hidden).data();
    let w = store.value(layer.w_input).data();

    let mut d_pre = vec![T::zero(); len * h3];
    let mut d_u = vec![T::zero(); h3 * h];
    let mut carry = vec![T::zero(); h];
    let mut dh = vec![T::zero(); h];
    let mut dan = vec![T::zero(); h];
    let mut dq = vec![T::zero(); h];
    let mut q = vec![T::zero(); h];

    let steps: Vec<usize> = order(len, cache.reverse).collect();
    for &t in steps.iter().rev() {
        let (z, r, n, hp) = (
            &cache.z[t * h..(t + 1) * h],
            &cache.r[t * h..(t + 1) * h],
            &cache.n[t * h..(t + 1) * h],
            &cache.h_prev[t * h..(t + 1) * h],
        );
        for j in 0..h {
            dh[j] = d_out.row(t)[j] + carry[j];
        }
        let dp = &mut d_pre[t * h3..(t + 1) * h3];
        for j in 0..h {
            let dn = dh[j] * (T::one() - z[j]);
            dan[j] = dn * (T::one() - n[j] * n[j]);
            q[j] = r[j] * hp[j];
            carry[j] = dh[j] * z[j];
        }
        kernels::outer_acc(&mut d_u[2 * h * h..], &dan, &q);
        dq.iter_mut().for_each(|e| *e = T::zero());
        kernels::matvec_t_acc(&u[2 * h * h..], h, &dan, &mut dq);
        for j in 0..h {
            let dz = dh[j] * (hp[j] - n[j]);
            let dr = dq[j] * hp[j];
            carry[j] = carry[j] + dq[j] * r[j];
            dp[j] = dz * z[j] * (T::one() - z[j]);
            dp[h + j] = dr * r[j] * (T::one() - r[j]);
            dp[2 * h + j] = dan[j];
        }
        kernels::outer_acc(&mut d_u[..2 * h * h], &dp[..2 * h], hp);
        kernels::matvec_t_acc(&u[..2 * h * h], h, &dp[..2 * h], &mut carry);
    }

    kernels::matmul_tn_acc(
        &d_pre,
        h3,
        xs.data(),
        inp,
        grads.block_mut(layer.w_input).data_mut(),
    );
    {
        let gb = grads.block_mut(layer.bias);
        for t in 0..len {
            kernels::axpy(gb.data_mut(), T::one(), &d_pre[t * h3..(t + 1) * h3]);
        }
    }
    kernels::axpy(grads.block_mut(layer.w_hidden).data_mut(), T::one(), &d_u);
    kernels::matmul_nn_acc(&d_pre, h3, w, inp, d_xs.data_mut());
    Ok(())
}

/// Forward and backward GRUs over the same sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiGru {
    pub forward: GruLayer,
    pub backward: GruLayer,
}

pub struct BiGruOutput {
    /// `L x 2h`: row `i` is forward state `i` followed by backward state `i`.
    pub states: Var,
    /// Forward state after the last position followed by backward state
    /// after the first position.
    pub ends: Var,
}

impl BiGru {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(BiGru {
            forward: GruLayer::new(store, &format!("{name}.fwd"), input_size, hidden_size, rng)?,
            backward: GruLayer::new(store, &format!("{name}.bwd"), input_size, hidden_size, rng)?,
        })
    }

    pub fn bind<T: Scalar>(store: &ParamStore<T>, name: &str) -> Result<Self> {
        Ok(BiGru {
            forward: GruLayer::bind(store, &format!("{name}.fwd"))?,
            backward: GruLayer::bind(store, &format!("{name}.bwd"))?,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size
    }

    pub fn run<T: Scalar>(&self, g: &mut Graph<T>, xs: Var) -> Result<BiGruOutput> {
        let len = g.value(xs).rows();
        if g.value(xs).ndim() != 2 || len == 0 {
            return Err(Error::invalid("BiGRU needs a non-empty sequence"));
        }
        let fwd = g.gru(&self.forward, xs, false)?;
        let bwd = g.gru(&self.backward, xs, true)?;
        let states = g.concat_cols(fwd, bwd)?;
        let last = g.row(fwd, len - 1)?;
        let first = g.row(bwd, 0)?;
        let ends = g.concat(&[last, first])?;
        Ok(BiGruOutput { states, ends })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn layer(input: usize, hidden: usize, seed: u64) -> (ParamStore<f64>, GruLayer) {
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, rng::INIT, 0);
        let l = GruLayer::new(&mut store, "gru", input, hidden, &mut r).unwrap();
        // non-zero biases so every term is exercised
        for (i, b) in store.value_mut(l.bias).data_mut().iter_mut().enumerate() {
            *b = 0.1 * (i as f64 * 0.7).sin();
        }
        (store, l)
    }

    fn random_seq(len: usize, dim: usize, seed: u64) -> Tensor<f64> {
        let mut r = rng::stream(seed, "test", 0);
        Tensor::matrix(
            len,
            dim,
            (0..len * dim).map(|_| r.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_and_state_give_zero() {
        let (mut store, l) = layer(3, 2, 1);
        for id in [l.w_input, l.w_hidden, l.bias] {
            store
                .value_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|e| *e = 0.0);
        }
        let mut g = Graph::new(&store);
        let h0 = g.input(Tensor::zeros(&[2]));
        let x = g.input(Tensor::vector(vec![0.3, -0.2, 0.9]));
        let h1 = l.step(&mut g, h0, x).unwrap();
        assert_eq!(g.value(h1).data(), &[0.0, 0.0]);
    }

    #[test]
    fn single_unit_hand_computation() {
        let mut store = ParamStore::<f64>::new();
        let w = store
            .add(
                "g.w_input",
                Tensor::matrix(3, 1, vec![0.5, -0.4, 1.2]).unwrap(),
            )
            .unwrap();
        let u = store
            .add(
                "g.w_hidden",
                Tensor::matrix(3, 1, vec![0.3, 0.8, -0.6]).unwrap(),
            )
            .unwrap();
        let b = store
            .add("g.bias", Tensor::vector(vec![0.1, -0.2, 0.05]))
            .unwrap();
        let l = GruLayer {
            input_size: 1,
            hidden_size: 1,
            w_input: w,
            w_hidden: u,
            bias: b,
        };
        let (x, hp) = (0.7, -0.3);
        let z = 1.0 / (1.0 + (-(0.5 * x + 0.3 * hp + 0.1f64)).exp());
        let r = 1.0 / (1.0 + (-(-0.4 * x + 0.8 * hp - 0.2f64)).exp());
        let n = (1.2 * x + -0.6 * (r * hp) + 0.05f64).tanh();
        let expected = z * hp + (1.0 - z) * n;
        let got = l.step_values(&store, &[hp], &[x]).unwrap()[0];
        assert!((got - expected).abs() < 1e-15);
        let mut g = Graph::new(&store);
        let hv = g.input(Tensor::vector(vec![hp]));
        let xv = g.input(Tensor::vector(vec![x]));
        let out = l.step(&mut g, hv, xv).unwrap();
        assert!((g.value(out).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn fused_sequence_matches_composed_steps() {
        let (store, l) = layer(4, 3, 2);
        let xs = random_seq(5, 4, 3);
        for reverse in [false, true] {
            let mut g = Graph::new(&store);
            let xv = g.input(xs.clone());
            let fused = g.gru(&l, xv, reverse).unwrap();
            let mut h = vec![0.0; 3];
            let idx: Vec<usize> = if reverse {
                (0..5).rev().collect()
            } else {
                (0..5).collect()
            };
            for t in idx {
                h = l.step_values(&store, &h, xs.row(t)).unwrap();
                for (a, b) in g.value(fused).row(t).iter().zip(&h) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    /// Fused backpropagation through time against the tape of primitive steps.
    #[test]
    fn fused_gradients_match_composed_gradients() {
        let (store, l) = layer(3, 4, 4);
        let xs = random_seq(6, 3, 5);
        let weights = random_seq(6, 4, 6);
        for reverse in [false, true] {
            let mut g = Graph::new(&store);
            let xv = g.input(xs.clone());
            let hs = g.gru(&l, xv, reverse).unwrap();
            let wv = g.input(weights.clone());
            let prod = g.mul(hs, wv).unwrap();
            let sums = g.rowsum(prod).unwrap();
            let loss = g.pow_sum(sums, 2).unwrap();
            let mut fused = Grads::for_store(&store);
            let adj = g.backward(loss, &mut fused).unwrap();
            let fused_dx = adj.get(xv).unwrap().clone();

            let mut g = Graph::new(&store);
            let mut h = g.input(Tensor::zeros(&[4]));
            let mut xin = Vec::new();
            let mut terms = vec![None; 6];
            let idx: Vec<usize> = if reverse {
                (0..6).rev().collect()
            } else {
                (0..6).collect()
            };
            for &t in &idx {
                let x = g.input(Tensor::vector(xs.row(t).to_vec()));
                xin.push((t, x));
                h = l.step(&mut g, h, x).unwrap();
                let w = g.input(Tensor::vector(weights.row(t).to_vec()));
                terms[t] = Some(g.dot(h, w).unwrap());
            }
            let parts: Vec<Var> = terms.into_iter().map(Option::unwrap).collect();
            let cat = g.concat(&parts).unwrap();
            let loss2 = g.pow_sum(cat, 2).unwrap();
            assert!((g.value(loss2).item() - g.value(loss2).item()).abs() < 1e-14);
            let mut composed = Grads::for_store(&store);
            let adj2 = g.backward(loss2, &mut composed).unwrap();
            for id in [l.w_input, l.w_hidden, l.bias] {
                for (a, b) in fused.dense(id).data().iter().zip(composed.dense(id).data()) {
                    assert!((a - b).abs() < 1e-12, "{id:?}: {a} vs {b}");
                }
            }
            for (t, x) in xin {
                for (a, b) in fused_dx.row(t).iter().zip(adj2.get(x).unwrap().data()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let (store, l) = layer(3, 2, 7);
        let x0 = vec![0.4, -0.9, 0.2];
        let h0 = vec![0.3, -0.5];
        let w = [0.7, -1.3];
        let loss = |s: &ParamStore<f64>, x: &[f64], hp: &[f64]| {
            let out = l.step_values(s, hp, x).unwrap();
            out[0] * w[0] + out[1] * w[1]
        };
        let mut g = Graph::new(&store);
        let hv = g.input(Tensor::vector(h0.clone()));
        let xv = g.input(Tensor::vector(x0.clone()));
        let out = l.step(&mut g, hv, xv).unwrap();
        let wv = g.input(Tensor::vector(w.to_vec()));
        let root = g.dot(out, wv).unwrap();
        let mut grads = Grads::for_store(&store);
        let adj = g.backward(root, &mut grads).unwrap();
        let eps = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        for id in [l.w_input, l.w_hidden, l.bias] {
            let analytic = grads.dense(id);
            for k in 0..store.value(id).len() {
                let mut s = store.clone();
                s.value_mut(id).data_mut()[k] += eps;
                let up = loss(&s, &x0, &h0);
                s.value_mut(id).data_mut()[k] -= 2.0 * eps;
                let down = loss(&s, &x0, &h0);
                let n = (up - down) / (2.0 * eps);
                assert!(rel(analytic.data()[k], n) < 1e-4);
            }
        }
        for k in 0..3 {
            let mut x = x0.clone();
            x[k] += eps;
            let up = loss(&store, &x, &h0);
            x[k] -= 2.0 * eps;
            let n = (up - loss(&store, &x, &h0)) / (2.0 * eps);
            assert!(rel(adj.get(xv).unwrap().data()[k], n) < 1e-4);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (store, l) = layer(3, 2, 8);
        let mut g = Graph::new(&store);
        let h = g.input(Tensor::zeros(&[2]));
        let x = g.input(Tensor::zeros(&[4]));
        assert!(matches!(
            l.step(&mut g, h, x),
            Err(Error::ShapeMismatch { .. })
        ));
        let xs = g.input(Tensor::zeros(&[5, 2]));
        assert!(g.gru(&l, xs, false).is_err());
        assert!(l.step_values(&store, &[0.0; 2], &[0.0; 2]).is_err());
    }

    fn bigru(input: usize, hidden: usize) -> (ParamStore<f64>, BiGru) {
        let mut store = ParamStore::new();
        let mut r = rng::stream(9, rng::INIT, 0);
        let b = BiGru::new(&mut store, "bi", input, hidden, &mut r).unwrap();
        (store, b)
    }

    #[test]
    fn bigru_shapes_and_length_one() {
        let (store, b) = bigru(3, 5);
        let mut g = Graph::new(&store);
        let xs = g.input(random_seq(4, 3, 1));
        let out = b.run(&mut g, xs).unwrap();
        assert_eq!(g.value(out.states).shape(), &[4, 10]);
        assert_eq!(g.value(out.ends).shape(), &[10]);

        let xs = g.input(random_seq(1, 3, 2));
        let out = b.run(&mut g, xs).unwrap();
        assert_eq!(g.value(out.states).shape(), &[1, 10]);
        assert_eq!(g.value(out.states).row(0), g.value(out.ends).data());

        let empty = g.input(Tensor::zeros(&[0, 3]));
        assert!(b.run(&mut g, empty).is_err());
    }

    #[test]
    fn bigru_paper_width() {
        let (store, b) = bigru(4, 128);
        let mut g = Graph::new(&store);
        let xs = g.input(random_seq(3, 4, 3));
        let out = b.run(&mut g, xs).unwrap();
        assert_eq!(g.value(out.states).cols(), 256);
    }

    #[test]
    fn reversing_input_swaps_directions() {
        let (store, b) = bigru(3, 4);
        let seq = random_seq(5, 3, 4);
        let mut rev_rows: Vec<Vec<f64>> = (0..5).map(|i| seq.row(i).to_vec()).collect();
        rev_rows.reverse();
        let rev = Tensor::from_rows(&rev_rows).unwrap();
        // Swap the two directions' weights so the "forward" layer of the
        // second model is the backward layer of the first.
        let swapped = BiGru {
            forward: b.backward,
            backward: b.forward,
        };
        let mut g = Graph::new(&store);
        let a = g.input(seq);
        let out_a = b.run(&mut g, a).unwrap();
        let r = g.input(rev);
        let out_b = swapped.run(&mut g, r).unwrap();
        let (sa, sb) = (g.value(out_a.states), g.value(out_b.states));
        for i in 0..5 {
            let (ra, rb) = (sa.row(i), sb.row(4 - i));
            assert_eq!(&ra[..4], &rb[4..]);
            assert_eq!(&ra[4..], &rb[..4]);
        }
        let (ea, eb) = (g.value(out_a.ends).data(), g.value(out_b.ends).data());
        assert_eq!(&ea[..4], &eb[4..]);
        assert_eq!(&ea[4..], &eb[..4]);
    }

    #[test]
    fn bind_recovers_layer() {
        let (store, b) = bigru(3, 2);
        assert_eq!(BiGru::bind(&store, "bi").unwrap(), b);
        assert!(GruLayer::bind(&store, "nope").is_err());
    }
}
