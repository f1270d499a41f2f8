//! Central-difference verification of analytic gradients.

use super::param::{Grads, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub entries: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_err < self.tolerance)
    }

    pub fn lines(&self) -> Vec<String> {
        self.blocks
            .iter()
            .map(|b| {
                format!(
                    "{} {:<32} entries={:<6} max_rel_err={:.3e} max_abs_err={:.3e}",
                    if b.max_rel_err < self.tolerance {
                        "PASS"
                    } else {
                        "FAIL"
                    },
                    b.name,
                    b.entries,
                    b.max_rel_err,
                    b.max_abs_err
                )
            })
            .collect()
    }
}

/// Relative error with a small scale floor so that two near-zero values do
/// not produce a spurious large ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const SCALE_FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(SCALE_FLOOR)
}

/// Compares analytic gradients from `loss_fn` with central differences of
/// step `h` for every entry of every parameter block.
///
/// `loss_fn(store, grads)` must return the loss and, when `grads` is given,
/// backpropagate into it. It must be deterministic: it is evaluated twice
/// up front and any difference is reported as a contract violation.
pub fn grad_check<T, F>(
    store: &mut ParamStore<T>,
    loss_fn: F,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&ParamStore<T>, Option<&mut Grads<T>>) -> Result<T>,
{
    let mut grads = Grads::for_store(store);
    let base = loss_fn(store, Some(&mut grads))?;
    let again = loss_fn(store, None)?;
    if base != again {
        return Err(Error::contract(format!(
            "loss is not deterministic: {base} then {again}"
        )));
    }
    let ids: Vec<_> = store.ids().collect();
    let mut blocks = Vec::with_capacity(ids.len());
    for id in ids {
        let analytic = grads.dense(id);
        let mut report = BlockReport {
            name: store.get(id).name.clone(),
            entries: analytic.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for k in 0..analytic.len() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + T::of(h);
            let up = loss_fn(store, None)?;
            store.value_mut(id).data_mut()[k] = orig - T::of(h);
            let down = loss_fn(store, None)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (up - down).to_f64_lossy() / (2.0 * h);
            let a = analytic.data()[k].to_f64_lossy();
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            report.max_rel_err = report.max_rel_err.max(relative_error(a, numeric));
        }
        blocks.push(report);
    }
    Ok(GradCheckReport {
        blocks,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Graph, Tensor};
    use std::cell::Cell;

    #[test]
    fn linear_loss_is_exact() {
        let mut store = ParamStore::<f64>::new();
        let w = store
            .add("w", Tensor::vector(vec![0.5, -1.0, 2.0]))
            .unwrap();
        let x = Tensor::vector(vec![1.5, 0.25, -3.0]);
        let report = grad_check(
            &mut store,
            |s, grads| {
                let mut g = Graph::new(s);
                let wv = g.param(w);
                let xv = g.input(x.clone());
                let out = g.dot(wv, xv)?;
                if let Some(gr) = grads {
                    g.backward(out, gr)?;
                }
                Ok(g.value(out).item())
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.blocks[0].max_abs_err < 1e-9, "{report:?}");
    }

    #[test]
    fn nondeterministic_loss_is_rejected() {
        let mut store = ParamStore::<f64>::new();
        store.add("w", Tensor::vector(vec![1.0])).unwrap();
        let calls = Cell::new(0.0);
        let err = grad_check(
            &mut store,
            |_, _| {
                calls.set(calls.get() + 1.0);
                Ok(calls.get())
            },
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
