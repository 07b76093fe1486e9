//! Explicit Runge–Kutta steppers on flat state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classic fixed-step fourth-order Runge–Kutta.
    Rk4,
    /// Dormand–Prince 5(4) with error control.
    Rk45,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Step size for `rk4`, initial step for `rk45` [s].
    pub dt: f64,
    pub method: Method,
    /// Width to which friction events are localized [s].
    pub event_tol: f64,
    /// Admissible violation of active velocity constraints [rad/s].
    pub constraint_tol: f64,
    /// Relative and absolute error tolerances of `rk45`.
    pub rtol: f64,
    pub atol: f64,
    /// Largest step `rk45` may take [s].
    pub max_step: f64,
    /// Record every n-th step (segment ends are always recorded).
    pub sample_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            method: Method::Rk4,
            event_tol: 1e-9,
            constraint_tol: 1e-6,
            rtol: 1e-9,
            atol: 1e-11,
            max_step: 1e-2,
            sample_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str| Error::InvalidParameter {
            field: f.into(),
            reason: "must be positive and finite".into(),
        };
        for (name, v) in [
            ("dt", self.dt),
            ("event_tol", self.event_tol),
            ("constraint_tol", self.constraint_tol),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name));
            }
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter {
                field: "sample_stride".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// One classic RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: &mut F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(x, h, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order solution and the
/// embedded error estimate.
pub fn dopri_step<F>(f: &mut F, t: f64, x: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut xs = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = DP_A[s][j];
            if a != 0.0 {
                for i in 0..n {
                    xs[i] += h * a * kj[i];
                }
            }
        }
        k.push(f(t + DP_C[s] * h, &xs)?);
    }
    let mut next = x.to_vec();
    let mut err = vec![0.0; n];
    for (s, ks) in k.iter().enumerate() {
        let (b, e) = (if s < 6 { DP_A[6][s] } else { 0.0 }, DP_E[s]);
        for i in 0..n {
            next[i] += h * b * ks[i];
            err[i] += h * e * ks[i];
        }
    }
    Ok((next, err))
}

/// Integrates `ẋ = f(t, x)` from `t0` to `t1`, calling `on_step` after
/// every accepted step with its end time and state. Fixed-step `rk4` uses
/// the smallest number of equal steps not exceeding `cfg.dt`.
pub fn integrate<F, G>(
    f: &mut F,
    t0: f64,
    t1: f64,
    x0: &[f64],
    cfg: &IntegratorConfig,
    mut on_step: G,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(x0.to_vec());
    }
    match cfg.method {
        Method::Rk4 => {
            let n = ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            let mut x = x0.to_vec();
            for i in 0..n {
                let t = t0 + i as f64 * h;
                x = rk4_step(f, t, &x, h)?;
                let te = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
                on_step(te, &x)?;
            }
            Ok(x)
        }
        Method::Rk45 => {
            let mut t = t0;
            let mut x = x0.to_vec();
            let mut h = cfg.dt.min(cfg.max_step).min(span);
            let mut rejects = 0usize;
            while t < t1 {
                let last = t + h >= t1 - 1e-15 * t1.abs().max(1.0);
                let step = if last { t1 - t } else { h };
                let (xn, err) = dopri_step(f, t, &x, step)?;
                let norm = err
                    .iter()
                    .zip(x.iter().zip(&xn))
                    .map(|(e, (a, b))| {
                        let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
                        (e / sc).powi(2)
                    })
                    .sum::<f64>()
                    / x.len().max(1) as f64;
                let norm = norm.sqrt();
                if norm <= 1.0 || step < 1e-14 {
                    t = if last { t1 } else { t + step };
                    x = xn;
                    on_step(t, &x)?;
                    rejects = 0;
                } else {
                    rejects += 1;
                    if rejects > 50 {
                        return Err(Error::EventLocalization {
                            t,
                            reason: "adaptive step size collapsed".into(),
                        });
                    }
                }
                let fac = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (step * fac).min(cfg.max_step);
            }
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-x[0], x[0]])
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut f = decay;
        let exact = (-1.0f64).exp();
        let mut err = |dt: f64| {
            let cfg = IntegratorConfig::default().with_dt(dt);
            let x = integrate(&mut f, 0.0, 1.0, &[1.0, 0.0], &cfg, |_, _| Ok(())).unwrap();
            (x[0] - exact).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio.log2() - 4.0).abs() < 0.2, "observed order {}", ratio.log2());
    }

    #[test]
    fn rk45_meets_tolerance() {
        let mut f = decay;
        let cfg = IntegratorConfig {
            method: Method::Rk45,
            ..Default::default()
        };
        let mut steps = 0;
        let x = integrate(&mut f, 0.0, 2.0, &[1.0, 0.0], &cfg, |_, _| {
            steps += 1;
            Ok(())
        })
        .unwrap();
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-8);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!(steps < 2000);
    }

    #[test]
    fn linear_invariants_are_preserved() {
        // x0 + x1 is conserved exactly by every Runge-Kutta method
        let mut f = |_: f64, x: &[f64]| Ok(vec![x[1].sin(), -x[1].sin()]);
        let cfg = IntegratorConfig::default().with_dt(0.05);
        let x = integrate(&mut f, 0.0, 3.0, &[0.3, 1.2], &cfg, |_, _| Ok(())).unwrap();
        assert!((x[0] + x[1] - 1.5).abs() < 1e-14);
    }
}
