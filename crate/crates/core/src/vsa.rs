//! Variable-stiffness baseline: the same double pendulum driven through
//! massless springs whose stiffness is an integrated input.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::dynamics::{bias, mass_matrix};
use crate::params::PendulumParams;

pub const STATE_DIM: usize = 8;
pub const INPUT_DIM: usize = 4;

/// Admissible stiffness range [N·m/rad].
pub const STIFFNESS_MAX: f64 = 100.0;
/// Motor velocity bound [rad/s].
pub const MOTOR_VELOCITY_MAX: f64 = 2.0;
/// Stiffness adjustment rate bound [N·m/(rad·s)].
pub const STIFFNESS_RATE_MAX: f64 = 650.0;

/// `x = (θ, k, q, q̇)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VsaState {
    pub theta: [f64; 2],
    pub k: [f64; 2],
    pub q: [f64; 2],
    pub qdot: [f64; 2],
}

impl VsaState {
    pub fn equilibrium(k: [f64; 2]) -> Self {
        Self {
            theta: [0.0; 2],
            k,
            q: [0.0; 2],
            qdot: [0.0; 2],
        }
    }

    pub fn to_vector(&self) -> [f64; STATE_DIM] {
        [
            self.theta[0],
            self.theta[1],
            self.k[0],
            self.k[1],
            self.q[0],
            self.q[1],
            self.qdot[0],
            self.qdot[1],
        ]
    }

    pub fn from_vector(x: &[f64]) -> Self {
        Self {
            theta: [x[0], x[1]],
            k: [x[2], x[3]],
            q: [x[4], x[5]],
            qdot: [x[6], x[7]],
        }
    }
}

/// `u = (u_θ, u_k)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VsaInput {
    pub u_theta: [f64; 2],
    pub u_k: [f64; 2],
}

impl VsaInput {
    pub fn to_vector(&self) -> [f64; INPUT_DIM] {
        [self.u_theta[0], self.u_theta[1], self.u_k[0], self.u_k[1]]
    }

    pub fn from_vector(u: &[f64]) -> Self {
        Self {
            u_theta: [u[0], u[1]],
            u_k: [u[2], u[3]],
        }
    }

    pub fn within_bounds(&self) -> bool {
        self.u_theta.iter().all(|v| v.abs() <= MOTOR_VELOCITY_MAX)
            && self.u_k.iter().all(|v| v.abs() <= STIFFNESS_RATE_MAX)
    }
}

/// `ẋ = (u_θ, u_k, q̇, M⁻¹(K(θ − q) − h))` on the flat state vector.
pub fn vsa_flow_vector<S: Scalar>(params: &PendulumParams, x: &[S], u: &[S]) -> [S; STATE_DIM] {
    let q = [x[4], x[5]];
    let qd = [x[6], x[7]];
    let m = mass_matrix(&q, params);
    let h = bias(&q, &qd, params);
    let r0 = x[2] * (x[0] - x[4]) - h[0];
    let r1 = x[3] * (x[1] - x[5]) - h[1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let a0 = (m[1][1] * r0 - m[0][1] * r1) / det;
    let a1 = (m[0][0] * r1 - m[1][0] * r0) / det;
    [u[0], u[1], u[2], u[3], qd[0], qd[1], a0, a1]
}

pub fn vsa_flow(params: &PendulumParams, x: &VsaState, u: &VsaInput) -> [f64; STATE_DIM] {
    vsa_flow_vector(params, &x.to_vector(), &u.to_vector())
}

/// Total mechanical energy of the variable-stiffness pendulum.
pub fn vsa_total_energy(params: &PendulumParams, x: &VsaState) -> f64 {
    crate::dynamics::vsa_energy(&x.theta, &x.k, &x.q, &x.qdot, params).total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_point() {
        let p = PendulumParams::default();
        let x = VsaState::equilibrium([50.0, 50.0]);
        let xd = vsa_flow(&p, &x, &VsaInput::default());
        assert!(xd.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_stiffness_decouples_motor() {
        let p = PendulumParams::default();
        let mut a = VsaState::equilibrium([0.0, 0.0]);
        a.q = [0.4, -0.3];
        a.qdot = [1.0, 2.0];
        let mut b = a;
        b.theta = [3.0, -1.0];
        let u = VsaInput {
            u_theta: [2.0, -2.0],
            u_k: [0.0, 0.0],
        };
        let fa = vsa_flow(&p, &a, &u);
        let fb = vsa_flow(&p, &b, &u);
        assert_eq!(&fa[4..], &fb[4..]);
    }

    #[test]
    fn stiffness_is_integrated_input() {
        let p = PendulumParams::default();
        let x = VsaState::equilibrium([10.0, 20.0]);
        let u = VsaInput {
            u_theta: [0.0; 2],
            u_k: [300.0, -650.0],
        };
        assert!(u.within_bounds());
        let xd = vsa_flow(&p, &x, &u);
        assert_eq!([xd[2], xd[3]], [300.0, -650.0]);
    }
}
