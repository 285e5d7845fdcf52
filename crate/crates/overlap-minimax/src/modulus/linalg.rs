//! Symmetric positive-definite solves for the interior-point Newton systems.
//!
//! Every Newton block has the form `diag(c) + sum_e rho_e (e_p - e_q)(e_p - e_q)^T`
//! with `c, rho >= 0`: a weighted graph Laplacian plus a diagonal.

use crate::real::Real;

/// Factorisation of a path-graph Laplacian plus diagonal (tridiagonal).
///
/// Pivots are formed from series conductances `rho*a/(rho+a)` rather than
/// `d - rho^2/pivot`, which avoids cancellation when edge weights span many
/// orders of magnitude near the end of an interior-point run.
pub(crate) struct ChainFactor<T> {
    rho: Vec<T>,
    pivot: Vec<T>,
}

impl<T: Real> ChainFactor<T> {
    /// `c` has one entry per node, `rho[k]` is the weight of edge `(k, k+1)`.
    pub fn new(c: &[T], rho: &[T]) -> Self {
        let n = c.len();
        debug_assert_eq!(rho.len() + 1, n.max(1));
        let mut pivot = Vec::with_capacity(n);
        let mut carried = T::zero();
        for k in 0..n {
            let a = c[k] + carried;
            let r = if k + 1 < n { rho[k] } else { T::zero() };
            pivot.push(a + r);
            carried = if r > T::zero() && a > T::zero() { r * a / (r + a) } else { T::zero() };
        }
        Self {
            rho: rho.to_vec(),
            pivot,
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.pivot.len();
        let mut y = rhs.to_vec();
        for k in 1..n {
            let m = self.rho[k - 1] / self.pivot[k - 1];
            let prev = y[k - 1];
            y[k] += m * prev;
        }
        for k in (0..n).rev() {
            if k + 1 < n {
                let next = y[k + 1];
                y[k] += self.rho[k] * next;
            }
            y[k] /= self.pivot[k];
        }
        y
    }
}

/// Dense Cholesky factor stored row-major (lower triangle used).
pub(crate) struct DenseFactor<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> DenseFactor<T> {
    /// Factors the symmetric matrix `a` (row-major, `n x n`); `None` if not positive definite.
    pub fn new(mut a: Vec<T>, n: usize) -> Option<Self> {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > T::zero()) {
                return None;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let (ri, rj) = (i * n, j * n);
                let mut s = a[ri + j];
                for k in 0..j {
                    s -= a[ri + k] * a[rj + k];
                }
                a[ri + j] = s / d;
            }
        }
        Some(Self { n, l: a })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_matrix(c: &[f64], rho: &[f64]) -> Vec<f64> {
        let n = c.len();
        let mut a = vec![0.0; n * n];
        for k in 0..n {
            a[k * n + k] = c[k];
        }
        for (k, &r) in rho.iter().enumerate() {
            a[k * n + k] += r;
            a[(k + 1) * n + k + 1] += r;
            a[k * n + k + 1] -= r;
            a[(k + 1) * n + k] -= r;
        }
        a
    }

    fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn chain_and_dense_agree() {
        let c = [1.0, 0.0, 0.5, 0.0, 2.0];
        let rho = [3.0, 1e-3, 7.0, 0.25];
        let b = [1.0, -2.0, 0.5, 4.0, -1.0];
        let x1 = ChainFactor::new(&c, &rho).solve(&b);
        let a = chain_matrix(&c, &rho);
        let x2 = DenseFactor::new(a.clone(), 5).unwrap().solve(&b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()), "{u} vs {v}");
        }
        let r = matvec(&a, &x1);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn chain_survives_huge_edge_weights() {
        let c = [1.0f64, 1.0, 1.0];
        let rho = [1e18, 1e-6];
        let b = [1.0, 1.0, 1.0];
        let x = ChainFactor::new(&c, &rho).solve(&b);
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((x[1] - 1.0).abs() < 1e-9);
        assert!((x[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_node() {
        let x = ChainFactor::new(&[4.0], &[]).solve(&[2.0]);
        assert_eq!(x, vec![0.5]);
    }

    #[test]
    fn dense_rejects_indefinite() {
        assert!(DenseFactor::new(vec![1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
