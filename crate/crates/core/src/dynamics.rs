//! Planar two-link rigid-body dynamics, spring kinetics and energy
//! bookkeeping.
//!
//! Link angles are relative: `q1` is measured from the downward vertical,
//! `q2` from the first link. `q = (0, 0)` is the hanging equilibrium and the
//! zero of the gravity potential. The extended coordinates are stacked as
//! `ξ = (ψ1, ψ2, q1, q2)` everywhere.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::params::PendulumParams;

pub type Vec2<S> = [S; 2];
pub type Mat2<S> = [[S; 2]; 2];
pub type Vec4<S> = [S; 4];
pub type Mat4<S> = [[S; 4]; 4];

/// Link-side inertia matrix `M(q)`.
pub fn mass_matrix<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> Mat2<S> {
    let c2 = q[1].cos();
    let a = p.jl1 + p.m1 * p.lc1 * p.lc1 + p.jl2 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2);
    let b = p.m2 * p.l1 * p.lc2;
    let d = p.jl2 + p.m2 * p.lc2 * p.lc2;
    let m11 = c2 * (2.0 * b) + a;
    let m12 = c2 * b + d;
    [[m11, m12], [m12, S::cst(d)]]
}

/// Coriolis/centrifugal matrix in the factorization with `Ṁ − 2C` skew.
pub fn coriolis_matrix<S: Scalar>(q: &Vec2<S>, qd: &Vec2<S>, p: &PendulumParams) -> Mat2<S> {
    let beta = q[1].sin() * (p.m2 * p.l1 * p.lc2);
    [[-(beta * qd[1]), -(beta * (qd[0] + qd[1]))], [beta * qd[0], S::zero()]]
}

/// Gravity torque `∂V/∂q`.
pub fn gravity_torque<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> Vec2<S> {
    let s1 = q[0].sin();
    let s12 = (q[0] + q[1]).sin();
    let g2 = s12 * (p.m2 * p.lc2 * p.g);
    [s1 * ((p.m1 * p.lc1 + p.m2 * p.l1) * p.g) + g2, g2]
}

/// Nonlinear bias `h(q, q̇) = C(q, q̇) q̇ + ∂V/∂q`.
pub fn bias<S: Scalar>(q: &Vec2<S>, qd: &Vec2<S>, p: &PendulumParams) -> Vec2<S> {
    let c = coriolis_matrix(q, qd, p);
    let g = gravity_torque(q, p);
    [
        c[0][0] * qd[0] + c[0][1] * qd[1] + g[0],
        c[1][0] * qd[0] + c[1][1] * qd[1] + g[1],
    ]
}

/// Gravity potential, zero at the hanging equilibrium.
pub fn gravity_potential<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> S {
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    let one_minus_c1 = -c1 + 1.0;
    one_minus_c1 * ((p.m1 * p.lc1 + p.m2 * p.l1) * p.g) + (-c12 + 1.0) * (p.m2 * p.lc2 * p.g)
}

/// Planar position of the tool centre point (tip of link 2).
pub fn tcp_position<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> Vec2<S> {
    let q12 = q[0] + q[1];
    [
        q[0].sin() * p.l1 + q12.sin() * p.l2,
        -(q[0].cos() * p.l1) - q12.cos() * p.l2,
    ]
}

/// Positions of both link tips, useful for line sketches.
pub fn joint_positions(q: &Vec2<f64>, p: &PendulumParams) -> [Vec2<f64>; 2] {
    let elbow = [q[0].sin() * p.l1, -q[0].cos() * p.l1];
    [elbow, tcp_position(q, p)]
}

/// TCP Jacobian `J(q)` with `v = J(q) q̇`.
pub fn tcp_jacobian<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> Mat2<S> {
    let q12 = q[0] + q[1];
    let (c1, s1) = (q[0].cos(), q[0].sin());
    let (c12, s12) = (q12.cos(), q12.sin());
    [
        [c1 * p.l1 + c12 * p.l2, c12 * p.l2],
        [s1 * p.l1 + s12 * p.l2, s12 * p.l2],
    ]
}

/// Planar TCP velocity.
pub fn tcp_velocity_vector<S: Scalar>(q: &Vec2<S>, qd: &Vec2<S>, p: &PendulumParams) -> Vec2<S> {
    let j = tcp_jacobian(q, p);
    [j[0][0] * qd[0] + j[0][1] * qd[1], j[1][0] * qd[0] + j[1][1] * qd[1]]
}

/// Squared TCP speed `‖J q̇‖²` (smooth everywhere).
pub fn tcp_speed_sq<S: Scalar>(q: &Vec2<S>, qd: &Vec2<S>, p: &PendulumParams) -> S {
    let v = tcp_velocity_vector(q, qd, p);
    v[0] * v[0] + v[1] * v[1]
}

/// TCP velocity and its Euclidean norm `v_TCP`.
pub fn tcp_velocity(q: &Vec2<f64>, qd: &Vec2<f64>, p: &PendulumParams) -> (Vec2<f64>, f64) {
    let v = tcp_velocity_vector(q, qd, p);
    (v, v[0].hypot(v[1]))
}

/// Stacked spring torque `(K(θ − ψ), 0, 0)` with a diagonal stiffness.
pub fn spring_torque<S: Scalar>(theta: &Vec2<S>, psi: &Vec2<S>, k: &Vec2<S>) -> Vec4<S> {
    [
        k[0] * (theta[0] - psi[0]),
        k[1] * (theta[1] - psi[1]),
        S::zero(),
        S::zero(),
    ]
}

/// Block-diagonal inertia `Π(ξ) = blkdiag(diag(Js1, Js2), M(q))`.
pub fn big_inertia<S: Scalar>(q: &Vec2<S>, p: &PendulumParams) -> Mat4<S> {
    let m = mass_matrix(q, p);
    let z = S::zero();
    [
        [S::cst(p.js1), z, z, z],
        [z, S::cst(p.js2), z, z],
        [z, z, m[0][0], m[0][1]],
        [z, z, m[1][0], m[1][1]],
    ]
}

/// Extended bias `η = (0, 0, h(q, q̇))`.
pub fn extended_bias<S: Scalar>(xi: &Vec4<S>, xid: &Vec4<S>, p: &PendulumParams) -> Vec4<S> {
    let h = bias(&[xi[2], xi[3]], &[xid[2], xid[3]], p);
    [S::zero(), S::zero(), h[0], h[1]]
}

/// Energy content of the pendulum and its springs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½ q̇ᵀ M(q) q̇` [J].
    pub kinetic_link: f64,
    /// `½ ψ̇ᵀ B ψ̇` [J].
    pub kinetic_spring: f64,
    /// Gravity potential relative to the hanging equilibrium [J].
    pub potential_gravity: f64,
    /// Spring potential per joint `½ k_i (θ_i − ψ_i)²` [J].
    pub potential_spring: [f64; 2],
}

impl EnergyBreakdown {
    pub fn kinetic(&self) -> f64 {
        self.kinetic_link + self.kinetic_spring
    }

    pub fn potential(&self) -> f64 {
        self.potential_gravity + self.potential_spring[0] + self.potential_spring[1]
    }

    pub fn total(&self) -> f64 {
        self.kinetic() + self.potential()
    }
}

/// Energy of the clutch-switched pendulum. For the variable-stiffness model
/// pass `ψ = q` and zero spring velocities (`xi = (q, q)`), since its springs
/// have no inertia of their own.
pub fn energy(
    theta: &Vec2<f64>,
    xi: &Vec4<f64>,
    xidot: &Vec4<f64>,
    k: &Vec2<f64>,
    p: &PendulumParams,
) -> EnergyBreakdown {
    let q = [xi[2], xi[3]];
    let qd = [xidot[2], xidot[3]];
    let m = mass_matrix(&q, p);
    let kinetic_link =
        0.5 * (qd[0] * (m[0][0] * qd[0] + m[0][1] * qd[1]) + qd[1] * (m[1][0] * qd[0] + m[1][1] * qd[1]));
    let kinetic_spring = 0.5 * (p.js1 * xidot[0] * xidot[0] + p.js2 * xidot[1] * xidot[1]);
    let d = [theta[0] - xi[0], theta[1] - xi[1]];
    EnergyBreakdown {
        kinetic_link,
        kinetic_spring,
        potential_gravity: gravity_potential(&q, p),
        potential_spring: [0.5 * k[0] * d[0] * d[0], 0.5 * k[1] * d[1] * d[1]],
    }
}

/// Energy of the variable-stiffness pendulum (springs without inertia).
pub fn vsa_energy(
    theta: &Vec2<f64>,
    k: &Vec2<f64>,
    q: &Vec2<f64>,
    qd: &Vec2<f64>,
    p: &PendulumParams,
) -> EnergyBreakdown {
    let mut e = energy(theta, &[q[0], q[1], q[0], q[1]], &[0.0, 0.0, qd[0], qd[1]], k, p);
    e.kinetic_spring = 0.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PendulumParams {
        PendulumParams::default()
    }

    // Independent oracle: centre-of-mass positions from geometry, kinetic
    // energy from point masses plus rotational link inertia.
    fn com_positions(q: [f64; 2], p: &PendulumParams) -> [[f64; 2]; 2] {
        let c1 = [p.lc1 * q[0].sin(), -p.lc1 * q[0].cos()];
        let e = [p.l1 * q[0].sin(), -p.l1 * q[0].cos()];
        let a = q[0] + q[1];
        let c2 = [e[0] + p.lc2 * a.sin(), e[1] - p.lc2 * a.cos()];
        [c1, c2]
    }

    fn oracle_kinetic(q: [f64; 2], qd: [f64; 2], p: &PendulumParams) -> f64 {
        let h = 1e-6;
        let fwd = com_positions([q[0] + h * qd[0], q[1] + h * qd[1]], p);
        let bwd = com_positions([q[0] - h * qd[0], q[1] - h * qd[1]], p);
        let mut t = 0.0;
        for (i, m) in [p.m1, p.m2].into_iter().enumerate() {
            let vx = (fwd[i][0] - bwd[i][0]) / (2.0 * h);
            let vy = (fwd[i][1] - bwd[i][1]) / (2.0 * h);
            t += 0.5 * m * (vx * vx + vy * vy);
        }
        t + 0.5 * p.jl1 * qd[0] * qd[0] + 0.5 * p.jl2 * (qd[0] + qd[1]).powi(2)
    }

    fn oracle_potential(q: [f64; 2], p: &PendulumParams) -> f64 {
        let c = com_positions(q, p);
        // heights relative to the hanging configuration
        p.m1 * p.g * (c[0][1] + p.lc1) + p.m2 * p.g * (c[1][1] + p.l1 + p.lc2)
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy_hessian() {
        let p = params();
        for q in [[0.0, 0.0], [0.4, -1.1], [2.0, 2.5]] {
            let m = mass_matrix(&q, &p);
            // KE is quadratic in q̇: M_ij = T(e_i + e_j) - T(e_i) - T(e_j) for i != j
            let t = |a: [f64; 2]| oracle_kinetic(q, a, &p);
            let m11 = 2.0 * t([1.0, 0.0]);
            let m22 = 2.0 * t([0.0, 1.0]);
            let m12 = t([1.0, 1.0]) - t([1.0, 0.0]) - t([0.0, 1.0]);
            assert!((m[0][0] - m11).abs() < 1e-7, "{} vs {}", m[0][0], m11);
            assert!((m[1][1] - m22).abs() < 1e-7);
            assert!((m[0][1] - m12).abs() < 1e-7);
            assert_eq!(m[0][1], m[1][0]);
        }
    }

    #[test]
    fn mass_matrix_depends_only_on_elbow_angle() {
        let p = params();
        assert_eq!(mass_matrix(&[0.3, 0.7], &p), mass_matrix(&[-2.0, 0.7], &p));
    }

    #[test]
    fn bias_at_rest_is_gravity_gradient() {
        let p = params();
        assert_eq!(bias(&[0.0, 0.0], &[0.0, 0.0], &p), [0.0, 0.0]);
        let h = 1e-6;
        for q in [[0.3, -0.2], [1.2, 0.9], [-2.5, 1.7]] {
            let b = bias(&q, &[0.0, 0.0], &p);
            for i in 0..2 {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let fd = (oracle_potential(qp, &p) - oracle_potential(qm, &p)) / (2.0 * h);
                assert!((b[i] - fd).abs() < 1e-7, "dV/dq{} {} vs {}", i, b[i], fd);
            }
            assert!((gravity_potential(&q, &p) - oracle_potential(q, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn coriolis_factorization_is_skew() {
        let p = params();
        let q = [0.5, 1.3];
        let qd = [2.0, -3.0];
        let c = coriolis_matrix(&q, &qd, &p);
        let h = 1e-6;
        let mp = mass_matrix(&[q[0] + h * qd[0], q[1] + h * qd[1]], &p);
        let mm = mass_matrix(&[q[0] - h * qd[0], q[1] - h * qd[1]], &p);
        let mut n = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                n[i][j] = (mp[i][j] - mm[i][j]) / (2.0 * h) - 2.0 * c[i][j];
            }
        }
        assert!(n[0][0].abs() < 1e-8 && n[1][1].abs() < 1e-8);
        assert!((n[0][1] + n[1][0]).abs() < 1e-8);
    }

    #[test]
    fn tcp_velocity_of_extended_chain() {
        let p = params();
        let (_, v) = tcp_velocity(&[0.0, 0.0], &[1.0, 0.0], &p);
        assert!((v - 0.68).abs() < 1e-12);
        let (_, v0) = tcp_velocity(&[0.3, 0.2], &[0.0, 0.0], &p);
        assert_eq!(v0, 0.0);
    }

    #[test]
    fn tcp_jacobian_matches_position_differences() {
        let p = params();
        let q = [0.7, -0.4];
        let j = tcp_jacobian(&q, &p);
        let h = 1e-6;
        for c in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let pp = tcp_position(&qp, &p);
            let pm = tcp_position(&qm, &p);
            for r in 0..2 {
                let fd = (pp[r] - pm[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() <= 1e-6 * j[r][c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn spring_torque_is_linear() {
        let t = spring_torque(&[0.1, -0.2], &[0.0, 0.0], &[100.0, 100.0]);
        assert!((t[0] - 10.0).abs() < 1e-12 && (t[1] + 20.0).abs() < 1e-12);
        assert_eq!([t[2], t[3]], [0.0, 0.0]);
        assert_eq!(spring_torque(&[0.4, 0.4], &[0.4, 0.4], &[100.0, 50.0]), [0.0; 4]);
        let t2 = spring_torque(&[0.1, -0.2], &[0.0, 0.0], &[200.0, 200.0]);
        assert_eq!([t2[0], t2[1]], [2.0 * t[0], 2.0 * t[1]]);
    }

    #[test]
    fn big_inertia_block_structure() {
        let p = params();
        let pi = big_inertia(&[0.2, 0.9], &p);
        assert_eq!(pi[0][0], 0.001);
        assert_eq!(pi[1][1], 0.001);
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(pi[i][j], 0.0);
                assert_eq!(pi[j][i], 0.0);
            }
        }
    }

    #[test]
    fn energy_reference_and_spring_term() {
        let p = params();
        let e = energy(&[0.0; 2], &[0.0; 4], &[0.0; 4], &[100.0, 100.0], &p);
        assert_eq!(e.total(), 0.0);
        let e = energy(&[0.3, 0.0], &[0.0; 4], &[0.0; 4], &[100.0, 100.0], &p);
        assert!((e.potential_spring[0] - 4.5).abs() < 1e-12);
    }
}
