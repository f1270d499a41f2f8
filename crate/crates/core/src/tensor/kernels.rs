//! Inner loops shared by the tensor ops and the fused GRU.

use crate::scalar::Scalar;

/// Dot product with eight independent accumulators (fixed summation order).
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() / 8 * 8;
    let mut acc = [T::zero(); 8];
    for (x, y) in a[..n].chunks_exact(8).zip(b[..n].chunks_exact(8)) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in a[n..].iter().zip(&b[n..]) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(y: &mut [T], alpha: T, x: &[T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// `out = M x` for a row-major `rows x cols` matrix.
pub fn matvec<T: Scalar>(m: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `out += M^T x`
pub fn matvec_t_acc<T: Scalar>(m: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (&xi, row) in x.iter().zip(m.chunks_exact(cols)) {
        if xi != T::zero() {
            axpy(out, xi, row);
        }
    }
}

/// `M += a b^T`
pub fn outer_acc<T: Scalar>(m: &mut [T], a: &[T], b: &[T]) {
    let cols = b.len();
    for (&ai, row) in a.iter().zip(m.chunks_exact_mut(cols)) {
        if ai != T::zero() {
            axpy(row, ai, b);
        }
    }
}

const BLOCK: usize = 8;

/// `out += A B^T` for `A: n x k`, `B: m x k`, `out: n x m`.
pub fn matmul_nt_acc<T: Scalar>(a: &[T], b: &[T], k: usize, out: &mut [T]) {
    let m = b.len() / k;
    let n = a.len() / k;
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        for (j, bj) in b.chunks_exact(k).enumerate() {
            for t in start..end {
                out[t * m + j] = out[t * m + j] + dot(&a[t * k..(t + 1) * k], bj);
            }
        }
    }
}

/// `out += A^T X` for `A: n x m`, `X: n x k`, `out: m x k`.
pub fn matmul_tn_acc<T: Scalar>(a: &[T], m: usize, x: &[T], k: usize, out: &mut [T]) {
    for (j, row) in out.chunks_exact_mut(k).enumerate() {
        for (t, xt) in x.chunks_exact(k).enumerate() {
            let c = a[t * m + j];
            if c != T::zero() {
                axpy(row, c, xt);
            }
        }
    }
}

/// `out += A W` for `A: n x m`, `W: m x k`, `out: n x k`.
pub fn matmul_nn_acc<T: Scalar>(a: &[T], m: usize, w: &[T], k: usize, out: &mut [T]) {
    let n = a.len() / m;
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        for (j, wj) in w.chunks_exact(k).enumerate() {
            for t in start..end {
                let c = a[t * m + j];
                if c != T::zero() {
                    axpy(&mut out[t * k..(t + 1) * k], c, wj);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        let b = vec![1.0; 7];
        assert_eq!(dot(&a, &b), 21.0);
        assert_eq!(dot::<f64>(&[], &[]), 0.0);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        matvec(&m, 3, &[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [-2.0, -2.0]);
        let mut back = [0.0; 3];
        matvec_t_acc(&m, 3, &[1.0, 1.0], &mut back);
        assert_eq!(back, [5.0, 7.0, 9.0]);
        let mut o = [0.0; 6];
        outer_acc(&mut o, &[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(o, [1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }

    #[test]
    fn blocked_products_match_naive() {
        let (n, m, k) = (11, 5, 3);
        let a: Vec<f64> = (0..n * m).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let w: Vec<f64> = (0..m * k).map(|i| ((i * 5 % 11) as f64) - 5.0).collect();
        let x: Vec<f64> = (0..n * k).map(|i| ((i * 3 % 7) as f64) - 3.0).collect();
        let mut nn = vec![0.0; n * k];
        matmul_nn_acc(&a, m, &w, k, &mut nn);
        let mut tn = vec![0.0; m * k];
        matmul_tn_acc(&a, m, &x, k, &mut tn);
        let bt: Vec<f64> = (0..m * k).map(|i| w[i]).collect(); // B: m x k
        let mut nt = vec![0.0; n * m];
        matmul_nt_acc(&x, &bt, k, &mut nt);
        for t in 0..n {
            for c in 0..k {
                let e: f64 = (0..m).map(|j| a[t * m + j] * w[j * k + c]).sum();
                assert_eq!(nn[t * k + c], e);
            }
            for j in 0..m {
                let e: f64 = (0..k).map(|c| x[t * k + c] * bt[j * k + c]).sum();
                assert_eq!(nt[t * m + j], e);
            }
        }
        for j in 0..m {
            for c in 0..k {
                let e: f64 = (0..n).map(|t| a[t * m + j] * x[t * k + c]).sum();
                assert_eq!(tn[j * k + c], e);
            }
        }
    }
}
