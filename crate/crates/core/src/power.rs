//! Power flow through the joint springs and actuator work accounting.
//!
//! Per joint, the power delivered by the spring to its output is
//! `P_out = τ_k · ω_out` and the power drawn from the actuators is
//! `P_in = P_out + Ė_s`. For the clutch-switched joint `ω_out = ψ̇`, which
//! equals `q̇` whenever the spring is connected to the link; for the
//! variable-stiffness joint `ω_out = q̇`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power flow at one instant, per joint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub t: f64,
    pub p_out: [f64; 2],
    pub es_dot: [f64; 2],
    pub p_in: [f64; 2],
}

impl PowerSample {
    pub fn new(t: f64, p_out: [f64; 2], es_dot: [f64; 2]) -> Self {
        Self {
            t,
            p_out,
            es_dot,
            p_in: [p_out[0] + es_dot[0], p_out[1] + es_dot[1]],
        }
    }

    /// CSV header matching [`PowerSample::csv_row`].
    pub const CSV_HEADER: &'static str = "t,P_out_1,P_out_2,Es_dot_1,Es_dot_2,P_in_1,P_in_2";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.t, self.p_out[0], self.p_out[1], self.es_dot[0], self.es_dot[1], self.p_in[0], self.p_in[1]
        )
    }
}

/// `P_out = τ_k · ω`.
pub fn power_out(tau_k: f64, omega: f64) -> f64 {
    tau_k * omega
}

/// `Ė_s = k (θ − ψ)(θ̇ − ψ̇)` for a fixed-stiffness spring.
pub fn spring_energy_rate_bsa(theta: f64, psi: f64, theta_dot: f64, psi_dot: f64, k: f64) -> f64 {
    k * (theta - psi) * (theta_dot - psi_dot)
}

/// `Ė_s = ½ k̇ (θ − q)² + k (θ − q)(θ̇ − q̇)` for a variable-stiffness spring.
pub fn spring_energy_rate_vsa(theta: f64, q: f64, theta_dot: f64, q_dot: f64, k: f64, k_dot: f64) -> f64 {
    let d = theta - q;
    0.5 * k_dot * d * d + k * d * (theta_dot - q_dot)
}

/// Positive and negative actuator work per joint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkSummary {
    pub positive: [f64; 2],
    pub negative: [f64; 2],
    /// `Σ (positive + negative)` over both joints [J].
    pub net: f64,
}

impl WorkSummary {
    pub fn net_per_joint(&self) -> [f64; 2] {
        [self.positive[0] + self.negative[0], self.positive[1] + self.negative[1]]
    }

    pub fn positive_total(&self) -> f64 {
        self.positive[0] + self.positive[1]
    }
}

/// Trapezoidal work integrals of `max(P_in, 0)` and `min(P_in, 0)`.
///
/// `samples` holds `(left, right)` power pairs per sample: `left` is the
/// limit from before the sample time and `right` the limit after it, so
/// that input switches and impulses located at sample times are integrated
/// without smearing. For smooth data pass the same value twice.
pub fn work_summary(samples: &[(PowerSample, PowerSample)]) -> Result<WorkSummary> {
    if samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut w = WorkSummary::default();
    for pair in samples.windows(2) {
        let a = &pair[0].1;
        let b = &pair[1].0;
        let dt = b.t - a.t;
        for j in 0..2 {
            let (pa, pb) = (a.p_in[j], b.p_in[j]);
            let (pos, neg) = split_trapezoid(pa, pb, dt);
            w.positive[j] += pos;
            w.negative[j] += neg;
        }
    }
    w.net = w.positive[0] + w.negative[0] + w.positive[1] + w.negative[1];
    Ok(w)
}

/// Integrates the linear interpolant between `a` and `b` over `dt`, split
/// into positive and negative parts (exact for a sign change inside).
fn split_trapezoid(a: f64, b: f64, dt: f64) -> (f64, f64) {
    if a >= 0.0 && b >= 0.0 {
        (0.5 * (a + b) * dt, 0.0)
    } else if a <= 0.0 && b <= 0.0 {
        (0.0, 0.5 * (a + b) * dt)
    } else {
        let tz = a.abs() / (a.abs() + b.abs()) * dt;
        let first = 0.5 * a * tz;
        let second = 0.5 * b * (dt - tz);
        if a > 0.0 {
            (first, second)
        } else {
            (second, first)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(samples: Vec<PowerSample>) -> Vec<(PowerSample, PowerSample)> {
        samples.into_iter().map(|s| (s, s)).collect()
    }

    #[test]
    fn power_out_examples() {
        assert_eq!(power_out(10.0, 0.0), 0.0);
        assert_eq!(power_out(10.0, 0.5), 5.0);
        assert_eq!(power_out(10.0, -0.5), -5.0);
    }

    #[test]
    fn energy_rate_examples() {
        assert_eq!(spring_energy_rate_vsa(0.3, 0.3, 1.0, -2.0, 50.0, 400.0), 0.0);
        let r = spring_energy_rate_bsa(0.1, 0.0, 1.0, 0.0, 100.0);
        assert!((r - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_by_construction() {
        let s = PowerSample::new(0.0, [1.5, -2.0], [0.25, 3.0]);
        for j in 0..2 {
            assert_eq!(s.p_in[j] - s.p_out[j] - s.es_dot[j], 0.0);
        }
    }

    #[test]
    fn constant_and_zero_power() {
        let zero = smooth(
            (0..11)
                .map(|i| PowerSample::new(i as f64 * 0.1, [0.0; 2], [0.0; 2]))
                .collect(),
        );
        assert_eq!(work_summary(&zero).unwrap(), WorkSummary::default());
        let two = smooth(
            (0..11)
                .map(|i| PowerSample::new(i as f64 * 0.1, [2.0, 0.0], [0.0; 2]))
                .collect(),
        );
        let w = work_summary(&two).unwrap();
        assert!((w.positive[0] - 2.0).abs() < 1e-12);
        assert_eq!(w.negative[0], 0.0);
        assert!((w.net - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sign_change_is_split_exactly() {
        let s = smooth(vec![
            PowerSample::new(0.0, [1.0, 0.0], [0.0; 2]),
            PowerSample::new(1.0, [-1.0, 0.0], [0.0; 2]),
        ]);
        let w = work_summary(&s).unwrap();
        assert!((w.positive[0] - 0.25).abs() < 1e-15);
        assert!((w.negative[0] + 0.25).abs() < 1e-15);
        assert!(w.net.abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(work_summary(&[]), Err(Error::EmptyTrajectory)));
    }
}
