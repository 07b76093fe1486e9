//! Small dense symmetric solves, generic over [`Scalar`] so that jump maps
//! and constrained flows stay differentiable.

use crate::ad::Scalar;

/// Dense LDLᵀ factorization of a small symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct SmallLdl<S> {
    n: usize,
    l: Vec<S>,
    d: Vec<S>,
}

impl<S: Scalar> SmallLdl<S> {
    /// Factors the row-major `n × n` matrix `a`. Returns `None` when a pivot
    /// is not strictly positive (matrix not SPD within roundoff).
    pub fn factor(a: &[S], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![S::zero(); n * n];
        let mut d = vec![S::zero(); n];
        let scale = (0..n).map(|i| a[i * n + i].re().abs()).fold(0.0, f64::max);
        for j in 0..n {
            let mut dj = a[j * n + j];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            if !(dj.re() > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
                return None;
            }
            d[j] = dj;
            l[j * n + j] = S::cst(1.0);
            for i in (j + 1)..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = v / dj;
            }
        }
        Some(Self { n, l, d })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[i * n + k] * x[k];
                x[i] -= t;
            }
        }
        for i in 0..n {
            x[i] = x[i] / self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.l[k * n + i] * x[k];
                x[i] -= t;
            }
        }
        x
    }
}

/// Symmetric eigenvalue-free positivity test used by validators.
pub fn is_spd(a: &[f64], n: usize) -> bool {
    SmallLdl::factor(a, n).is_some()
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut s = S::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let ldl = SmallLdl::factor(&a, 3).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ldl.solve(&b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert!(!is_spd(&[1.0, 2.0, 2.0, 1.0], 2));
        assert!(is_spd(&[2.0, 1.0, 1.0, 2.0], 2));
    }
}
