//! Collocation points and Lagrange-basis coefficients on the unit interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollocationKind {
    /// Gauss–Legendre points, all interior.
    #[default]
    Legendre,
    /// Right Radau points, the last one at `τ = 1`.
    Radau,
}

pub const MAX_DEGREE: usize = 9;

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Roots of `f` in `(a, b]` found by scanning for sign changes and bisecting.
fn roots_in(f: impl Fn(f64) -> f64, a: f64, b: f64, expected: usize) -> Vec<f64> {
    let n = 4000;
    let mut out = Vec::with_capacity(expected);
    let mut xl = a;
    let mut fl = f(a);
    for k in 1..=n {
        let xr = a + (b - a) * k as f64 / n as f64;
        let fr = f(xr);
        if fr == 0.0 {
            out.push(xr);
        } else if fl * fr < 0.0 {
            let (mut lo, mut hi, mut flo) = (xl, xr, fl);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 || hi - lo <= 2.0 * f64::EPSILON * mid.abs() {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        xl = xr;
        fl = fr;
    }
    out
}

/// Collocation points `τ_1 < … < τ_d` in `(0, 1]`.
///
/// Legendre points are the roots of the shifted Legendre polynomial
/// `P_d(2τ − 1)`; Radau points the roots of `P_d − P_{d−1}` at `2τ − 1`.
pub fn collocation_points(degree: usize, kind: CollocationKind) -> Result<Vec<f64>> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    let pts = match kind {
        CollocationKind::Legendre => roots_in(|t| legendre(degree, 2.0 * t - 1.0), 0.0, 1.0, degree),
        CollocationKind::Radau => {
            let f = |t: f64| {
                let x = 2.0 * t - 1.0;
                legendre(degree, x) - legendre(degree - 1, x)
            };
            let mut r = roots_in(f, 0.0, 1.0 - 1e-9, degree - 1);
            r.push(1.0);
            r
        }
    };
    if pts.len() != degree {
        return Err(Error::UnsupportedDegree(degree));
    }
    Ok(pts)
}

/// Polynomial coefficients, lowest order first.
type Poly = Vec<f64>;

fn poly_mul_linear(p: &Poly, root: f64, scale: f64) -> Poly {
    // p · (t − root) / scale
    let mut out = vec![0.0; p.len() + 1];
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] += c / scale;
        out[k] -= c * root / scale;
    }
    out
}

fn poly_eval(p: &Poly, t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn poly_deriv(p: &Poly) -> Poly {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

fn poly_integral_01(p: &Poly) -> f64 {
    p.iter().enumerate().map(|(k, &c)| c / (k as f64 + 1.0)).sum()
}

/// Interpolation on the nodes `{0, τ_1, …, τ_d}` of one normalized interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollocationScheme {
    pub kind: CollocationKind,
    pub degree: usize,
    /// Nodes `τ_0 = 0, τ_1, …, τ_d`.
    pub nodes: Vec<f64>,
    /// `c[r][j] = ℓ_r'(τ_j)`.
    pub c: Vec<Vec<f64>>,
    /// `d[r] = ℓ_r(1)`, the continuity coefficients.
    pub d: Vec<f64>,
    /// `b[r] = ∫₀¹ ℓ_r`, the quadrature weights.
    pub b: Vec<f64>,
}

impl CollocationScheme {
    pub fn new(degree: usize, kind: CollocationKind) -> Result<Self> {
        let mut nodes = vec![0.0];
        nodes.extend(collocation_points(degree, kind)?);
        let basis: Vec<Poly> = (0..=degree)
            .map(|r| {
                let mut p = vec![1.0];
                for s in 0..=degree {
                    if s != r {
                        p = poly_mul_linear(&p, nodes[s], nodes[r] - nodes[s]);
                    }
                }
                p
            })
            .collect();
        let c = basis
            .iter()
            .map(|p| {
                let dp = poly_deriv(p);
                nodes.iter().map(|&t| poly_eval(&dp, t)).collect()
            })
            .collect();
        let d = basis.iter().map(|p| poly_eval(p, 1.0)).collect();
        let b = basis.iter().map(poly_integral_01).collect();
        Ok(Self {
            kind,
            degree,
            nodes,
            c,
            d,
            b,
        })
    }

    /// Points `τ_1..τ_d`.
    pub fn points(&self) -> &[f64] {
        &self.nodes[1..]
    }

    /// Value at `τ` of the interpolant through `values[r]` at the nodes.
    pub fn interpolate(&self, values: &[f64], tau: f64) -> f64 {
        (0..=self.degree)
            .map(|r| {
                let mut l = 1.0;
                for s in 0..=self.degree {
                    if s != r {
                        l *= (tau - self.nodes[s]) / (self.nodes[r] - self.nodes[s]);
                    }
                }
                l * values[r]
            })
            .sum()
    }
}
