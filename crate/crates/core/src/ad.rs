//! Forward-mode automatic differentiation.
//!
//! Every model function in this crate is written once against the [`Scalar`]
//! trait and evaluated with `f64` for simulation, [`Dual`] for Jacobians and
//! [`Dual2`] for exact Hessians inside the collocation transcription.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real-number abstraction shared by `f64` and the dual number types.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<f64>
    + 'static
{
    fn cst(v: f64) -> Self;
    /// Value part, discarding all derivative information.
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number carrying a gradient with respect to `N` seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, eps: [0.0; N] }
    }

    /// Independent variable number `i`.
    pub fn variable(re: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Self { re, eps }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut eps = self.eps;
        for e in &mut eps {
            *e *= df;
        }
        Self { re: f, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps.iter()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.re * rhs.eps[i] + rhs.re * self.eps[i];
        }
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = (self.eps[i] - re * rhs.eps[i]) * inv;
        }
        Self { re, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.re = -self.re;
        for e in &mut self.eps {
            *e = -*e;
        }
        self
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self *= rhs;
        self
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> MulAssign<f64> for Dual<N> {
    #[inline]
    fn mul_assign(&mut self, rhs: f64) {
        self.re *= rhs;
        for e in &mut self.eps {
            *e *= rhs;
        }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s)
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, 0.5 / r)
    }
}

/// Second-order dual number: value, gradient and full (symmetric) Hessian
/// with respect to `N` seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<const N: usize> {
    pub re: f64,
    pub grad: [f64; N],
    pub hess: [[f64; N]; N],
}

impl<const N: usize> Dual2<N> {
    pub fn constant(re: f64) -> Self {
        Self {
            re,
            grad: [0.0; N],
            hess: [[0.0; N]; N],
        }
    }

    pub fn variable(re: f64, i: usize) -> Self {
        let mut d = Self::constant(re);
        d.grad[i] = 1.0;
        d
    }

    /// Applies a scalar function with derivatives `df`, `d2f` at the value.
    #[inline]
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..N {
            let gi = d2f * self.grad[i];
            for j in 0..N {
                out.hess[i][j] = df * self.hess[i][j] + gi * self.grad[j];
            }
        }
        out
    }
}

impl<const N: usize> Add for Dual2<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> Sub for Dual2<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const N: usize> Mul for Dual2<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.re * rhs.re);
        for i in 0..N {
            out.grad[i] = self.re * rhs.grad[i] + rhs.re * self.grad[i];
        }
        for i in 0..N {
            for j in 0..N {
                out.hess[i][j] = self.re * rhs.hess[i][j]
                    + rhs.re * self.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl<const N: usize> Div for Dual2<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let r = rhs.re;
        let inv = rhs.chain(1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r));
        self * inv
    }
}

impl<const N: usize> Neg for Dual2<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self *= -1.0;
        self
    }
}

impl<const N: usize> Add<f64> for Dual2<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual2<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual2<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self *= rhs;
        self
    }
}

impl<const N: usize> Div<f64> for Dual2<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const N: usize> AddAssign for Dual2<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.re += rhs.re;
        for i in 0..N {
            self.grad[i] += rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] += rhs.hess[i][j];
            }
        }
    }
}

impl<const N: usize> SubAssign for Dual2<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.re -= rhs.re;
        for i in 0..N {
            self.grad[i] -= rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] -= rhs.hess[i][j];
            }
        }
    }
}

impl<const N: usize> MulAssign<f64> for Dual2<N> {
    #[inline]
    fn mul_assign(&mut self, rhs: f64) {
        self.re *= rhs;
        for i in 0..N {
            self.grad[i] *= rhs;
            for j in 0..N {
                self.hess[i][j] *= rhs;
            }
        }
    }
}

impl<const N: usize> Scalar for Dual2<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }
}

/// Jacobian of `f: R^n -> R^m` at `x` (row-major, `m × n`), `n ≤ N`.
pub fn jacobian<const N: usize, F>(x: &[f64], m: usize, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&[Dual<N>]) -> Vec<Dual<N>>,
{
    assert!(x.len() <= N, "too many seeds for Dual<{N}>");
    let xs: Vec<Dual<N>> = x.iter().enumerate().map(|(i, &v)| Dual::variable(v, i)).collect();
    let out = f(&xs);
    debug_assert_eq!(out.len(), m);
    out.iter().map(|d| d.eps[..x.len()].to_vec()).collect()
}

/// Central finite-difference Jacobian with relative step `h`.
pub fn jacobian_fd<F>(x: &[f64], h: f64, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let fp = f(&xp);
        xp[j] = x[j] - step;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample<S: Scalar>(x: &[S]) -> S {
        // x0^2 sin(x1) / sqrt(1 + x2^2) + x0 x2
        let num = x[0] * x[0] * x[1].sin();
        let den = (x[2] * x[2] + 1.0).sqrt();
        num / den + x[0] * x[2] - x[1].cos()
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        let x = [0.7, -1.3, 0.4];
        let jac = jacobian::<3, _>(&x, 1, |v| vec![sample(v)]);
        let fd = jacobian_fd(&x, 1e-6, |v| vec![sample(v)]);
        for j in 0..3 {
            assert!((jac[0][j] - fd[0][j]).abs() < 1e-8);
        }
    }

    #[test]
    fn dual2_hessian_matches_gradient_differences() {
        let x = [0.7, -1.3, 0.4];
        let seeded: Vec<Dual2<3>> = x.iter().enumerate().map(|(i, &v)| Dual2::variable(v, i)).collect();
        let d = sample(&seeded);
        assert!((d.re - sample(&x)).abs() < 1e-14);
        let grad_at = |p: &[f64]| jacobian::<3, _>(p, 1, |v| vec![sample(v)])[0].clone();
        let fd = jacobian_fd(&x, 1e-6, grad_at);
        for i in 0..3 {
            for j in 0..3 {
                assert!((d.hess[i][j] - fd[i][j]).abs() < 1e-7, "H[{i}][{j}]");
                assert_eq!(d.hess[i][j], d.hess[j][i]);
            }
        }
    }

    #[test]
    fn mixed_f64_operations() {
        let a = Dual::<2>::variable(2.0, 0);
        let b = (a * 3.0 + 1.0) / 2.0 - 0.5;
        assert_eq!(b.re, 3.0);
        assert_eq!(b.eps, [1.5, 0.0]);
    }
}
