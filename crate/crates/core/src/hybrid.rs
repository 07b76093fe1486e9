//! Ideal clutch model: the double pendulum as a switched system with
//! impulsive effects.
//!
//! Each joint's switch-and-hold mechanism either brakes the spring output
//! (DEC, `ψ̇ = 0`) or couples it to the link (SEA, `ψ̇ = q̇`). A mode fixes a
//! 2×4 constraint matrix `C`; within a mode the constraint torque `λ` is
//! eliminated from
//!
//! ```text
//! Π(ξ) ξ̈ + η(ξ, ξ̇) − τ_k = Cᵀ λ,    C ξ̇ = 0,
//! ```
//!
//! where `τ_k = (K(θ − ψ), 0, 0)` is the spring torque acting on the spring
//! outputs. Mode changes reset the velocities by a momentum-conserving
//! impulse.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::dynamics::{big_inertia, extended_bias, spring_torque, Mat4, Vec2, Vec4};
use crate::error::{Error, Result};
use crate::linalg::SmallLdl;
use crate::params::PendulumParams;

/// Dimension of the hybrid state `x = (θ, ξ, ξ̇)`.
pub const STATE_DIM: usize = 10;
/// Dimension of the motor-velocity input.
pub const INPUT_DIM: usize = 2;

/// Actuator mode of the two switch-and-hold mechanisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BsaMode {
    #[serde(rename = "DEC-DEC")]
    DecDec,
    #[serde(rename = "SEA-SEA")]
    SeaSea,
    #[serde(rename = "DEC-SEA")]
    DecSea,
    #[serde(rename = "SEA-DEC")]
    SeaDec,
}

impl BsaMode {
    pub const ALL: [BsaMode; 4] = [BsaMode::DecDec, BsaMode::SeaSea, BsaMode::DecSea, BsaMode::SeaDec];

    /// Mode index `p ∈ {1, 2, 3, 4}`.
    pub fn index(self) -> usize {
        match self {
            BsaMode::DecDec => 1,
            BsaMode::SeaSea => 2,
            BsaMode::DecSea => 3,
            BsaMode::SeaDec => 4,
        }
    }

    pub fn from_index(p: usize) -> Result<Self> {
        match p {
            1 => Ok(BsaMode::DecDec),
            2 => Ok(BsaMode::SeaSea),
            3 => Ok(BsaMode::DecSea),
            4 => Ok(BsaMode::SeaDec),
            _ => Err(Error::UnknownMode(p)),
        }
    }

    /// Clutch states `(c1, c2)`; `true` connects the spring to the link.
    pub fn clutches(self) -> (bool, bool) {
        match self {
            BsaMode::DecDec => (false, false),
            BsaMode::SeaSea => (true, true),
            BsaMode::DecSea => (false, true),
            BsaMode::SeaDec => (true, false),
        }
    }

    pub fn from_clutches(c1: bool, c2: bool) -> Self {
        match (c1, c2) {
            (false, false) => BsaMode::DecDec,
            (true, true) => BsaMode::SeaSea,
            (false, true) => BsaMode::DecSea,
            (true, false) => BsaMode::SeaDec,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BsaMode::DecDec => "DEC-DEC",
            BsaMode::SeaSea => "SEA-SEA",
            BsaMode::DecSea => "DEC-SEA",
            BsaMode::SeaDec => "SEA-DEC",
        }
    }

    pub fn constraint(self) -> ConstraintMatrix {
        let (c1, c2) = self.clutches();
        ConstraintMatrix {
            rows: vec![joint_row(0, c1), joint_row(1, c2)],
        }
    }
}

impl std::fmt::Display for BsaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BsaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('_', "-");
        BsaMode::ALL
            .into_iter()
            .find(|m| m.name() == up)
            .ok_or_else(|| Error::Config(format!("unknown actuator mode `{s}`")))
    }
}

fn joint_row(joint: usize, connected: bool) -> [f64; 4] {
    let mut row = [0.0; 4];
    row[joint] = 1.0;
    if connected {
        row[joint + 2] = -1.0;
    }
    row
}

/// Constraint matrix `C` acting on `ξ̇`. Rows are braking rows `e_i` or
/// connecting rows `e_i − e_{i+2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMatrix {
    rows: Vec<[f64; 4]>,
}

impl ConstraintMatrix {
    /// Arbitrary rows, without structural checks. Used for fixtures and
    /// single-contact sub-problems.
    pub fn from_rows(rows: Vec<[f64; 4]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// `C v`.
    pub fn apply<S: Scalar>(&self, v: &Vec4<S>) -> Vec<S> {
        self.rows
            .iter()
            .map(|r| {
                let mut s = S::zero();
                for j in 0..4 {
                    if r[j] != 0.0 {
                        s += v[j] * r[j];
                    }
                }
                s
            })
            .collect()
    }

    /// `Cᵀ w`.
    pub fn apply_transpose<S: Scalar>(&self, w: &[S]) -> Vec4<S> {
        let mut out = [S::zero(); 4];
        for (r, wi) in self.rows.iter().zip(w) {
            for j in 0..4 {
                if r[j] != 0.0 {
                    out[j] += *wi * r[j];
                }
            }
        }
        out
    }
}

/// Constraint matrix of mode `p` as listed in the actuator mode table.
pub fn constraint_matrix(p: usize) -> Result<ConstraintMatrix> {
    Ok(BsaMode::from_index(p)?.constraint())
}

fn flatten<S: Scalar>(m: &Mat4<S>) -> Vec<S> {
    m.iter().flat_map(|r| r.iter().copied()).collect()
}

/// Solves the Schur system `(C Π⁻¹ Cᵀ) w = C Π⁻¹ r` for `w`.
fn schur_solve<S: Scalar>(pi: &SmallLdl<S>, c: &ConstraintMatrix, rhs: &Vec4<S>, what: &'static str) -> Result<Vec<S>> {
    let r = c.num_rows();
    let pinv_ct: Vec<Vec4<S>> = c
        .rows()
        .iter()
        .map(|row| {
            let col: Vec<S> = row.iter().map(|&v| S::cst(v)).collect();
            let s = pi.solve(&col);
            [s[0], s[1], s[2], s[3]]
        })
        .collect();
    let mut schur = vec![S::zero(); r * r];
    for i in 0..r {
        let ci = c.apply(&pinv_ct[i]);
        for j in 0..r {
            schur[j * r + i] = ci[j];
        }
    }
    let pinv_rhs = pi.solve(rhs);
    let b = c.apply(&[pinv_rhs[0], pinv_rhs[1], pinv_rhs[2], pinv_rhs[3]]);
    let ldl = SmallLdl::factor(&schur, r).ok_or(Error::SingularConstraint(what))?;
    Ok(ldl.solve(&b))
}

fn factor_inertia<S: Scalar>(pi: &Mat4<S>, what: &'static str) -> Result<SmallLdl<S>> {
    SmallLdl::factor(&flatten(pi), 4).ok_or(Error::SingularConstraint(what))
}

/// Constraint torque `λ = (C Π⁻¹ Cᵀ)⁻¹ C Π⁻¹ (η − τ_k)`, which makes the
/// constrained acceleration satisfy `C ξ̈ = 0`.
pub fn constraint_torque<S: Scalar>(
    pi: &Mat4<S>,
    c: &ConstraintMatrix,
    tau_k: &Vec4<S>,
    eta: &Vec4<S>,
) -> Result<Vec<S>> {
    let ldl = factor_inertia(pi, "constraint torque")?;
    let forcing = [
        eta[0] - tau_k[0],
        eta[1] - tau_k[1],
        eta[2] - tau_k[2],
        eta[3] - tau_k[3],
    ];
    schur_solve(&ldl, c, &forcing, "constraint torque")
}

/// Constrained acceleration `ξ̈ = Π⁻¹ (Cᵀ λ − η + τ_k)`.
pub fn constrained_acceleration<S: Scalar>(
    params: &PendulumParams,
    c: &ConstraintMatrix,
    theta: &Vec2<S>,
    xi: &Vec4<S>,
    xid: &Vec4<S>,
) -> Result<Vec4<S>> {
    let k = [S::cst(params.k1), S::cst(params.k2)];
    let pi = big_inertia(&[xi[2], xi[3]], params);
    let eta = extended_bias(xi, xid, params);
    let tau = spring_torque(theta, &[xi[0], xi[1]], &k);
    let ldl = factor_inertia(&pi, "flow")?;
    let forcing = [eta[0] - tau[0], eta[1] - tau[1], eta[2] - tau[2], eta[3] - tau[3]];
    let lambda = schur_solve(&ldl, c, &forcing, "flow")?;
    let ctl = c.apply_transpose(&lambda);
    let rhs = [
        ctl[0] - forcing[0],
        ctl[1] - forcing[1],
        ctl[2] - forcing[2],
        ctl[3] - forcing[3],
    ];
    let a = ldl.solve(&rhs);
    Ok([a[0], a[1], a[2], a[3]])
}

/// State derivative `ẋ = (u_θ, ξ̇, ξ̈)` of mode `mode` without checking the
/// velocity constraint. Used inside optimizers where iterates are not
/// feasible.
pub fn flow_unchecked<S: Scalar>(params: &PendulumParams, mode: BsaMode, x: &[S], u: &[S]) -> [S; STATE_DIM] {
    let theta = [x[0], x[1]];
    let xi = [x[2], x[3], x[4], x[5]];
    let xid = [x[6], x[7], x[8], x[9]];
    // Π is SPD for every q and the mode constraint matrices have full row rank.
    let acc = constrained_acceleration(params, &mode.constraint(), &theta, &xi, &xid)
        .expect("mode constraint system is nonsingular for valid parameters");
    [
        u[0], u[1], xid[0], xid[1], xid[2], xid[3], acc[0], acc[1], acc[2], acc[3],
    ]
}

/// Full hybrid state of the clutch-switched pendulum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsaState {
    pub theta: [f64; 2],
    pub xi: [f64; 4],
    pub xidot: [f64; 4],
    pub mode: BsaMode,
    pub t: f64,
}

impl BsaState {
    /// Hanging equilibrium with relaxed springs.
    pub fn equilibrium(mode: BsaMode) -> Self {
        Self {
            theta: [0.0; 2],
            xi: [0.0; 4],
            xidot: [0.0; 4],
            mode,
            t: 0.0,
        }
    }

    pub fn to_vector(&self) -> [f64; STATE_DIM] {
        let mut x = [0.0; STATE_DIM];
        x[..2].copy_from_slice(&self.theta);
        x[2..6].copy_from_slice(&self.xi);
        x[6..].copy_from_slice(&self.xidot);
        x
    }

    pub fn from_vector(x: &[f64], mode: BsaMode, t: f64) -> Self {
        Self {
            theta: [x[0], x[1]],
            xi: [x[2], x[3], x[4], x[5]],
            xidot: [x[6], x[7], x[8], x[9]],
            mode,
            t,
        }
    }

    pub fn q(&self) -> [f64; 2] {
        [self.xi[2], self.xi[3]]
    }

    pub fn qdot(&self) -> [f64; 2] {
        [self.xidot[2], self.xidot[3]]
    }

    /// `‖C_p ξ̇‖∞` of the active mode.
    pub fn constraint_residual(&self) -> f64 {
        self.mode
            .constraint()
            .apply(&self.xidot)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Checked flow: refuses states that violate the active velocity
/// constraint by more than `tol`.
pub fn flow(params: &PendulumParams, x: &BsaState, u: &[f64; 2], tol: f64) -> Result<[f64; STATE_DIM]> {
    let residual = x.constraint_residual();
    if residual > tol {
        return Err(Error::ConstraintViolation { residual, tol });
    }
    let c = x.mode.constraint();
    let acc = constrained_acceleration(params, &c, &x.theta, &x.xi, &x.xidot)?;
    let mut out = [0.0; STATE_DIM];
    out[..2].copy_from_slice(u);
    out[2..6].copy_from_slice(&x.xidot);
    out[6..].copy_from_slice(&acc);
    Ok(out)
}

/// Impulsive velocity reset onto the constraint `C ξ̇⁺ = 0`:
/// `Λ = −(C Π⁻¹ Cᵀ)⁻¹ C ξ̇⁻`, `ξ̇⁺ = ξ̇⁻ + Π⁻¹ Cᵀ Λ`.
pub fn impact_map<S: Scalar>(pi: &Mat4<S>, c: &ConstraintMatrix, xid_minus: &Vec4<S>) -> Result<(Vec4<S>, Vec<S>)> {
    let ldl = factor_inertia(pi, "impact map")?;
    // C ξ̇⁻ = C Π⁻¹ (Π ξ̇⁻)
    let mut p_xid = [S::zero(); 4];
    for i in 0..4 {
        for j in 0..4 {
            p_xid[i] += pi[i][j] * xid_minus[j];
        }
    }
    let w = schur_solve(&ldl, c, &p_xid, "impact map")?;
    let impulse: Vec<S> = w.into_iter().map(|v| -v).collect();
    let dv = ldl.solve(&c.apply_transpose(&impulse));
    let plus = [
        xid_minus[0] + dv[0],
        xid_minus[1] + dv[1],
        xid_minus[2] + dv[2],
        xid_minus[3] + dv[3],
    ];
    Ok((plus, impulse))
}

/// Jump map on the flat state vector, differentiable for the optimizer.
pub fn jump_unchecked<S: Scalar>(params: &PendulumParams, x: &[S], target: BsaMode) -> [S; STATE_DIM] {
    let pi = big_inertia(&[x[4], x[5]], params);
    let (plus, _) = impact_map(&pi, &target.constraint(), &[x[6], x[7], x[8], x[9]])
        .expect("mode constraint system is nonsingular for valid parameters");
    let mut out = [S::zero(); STATE_DIM];
    out[..6].copy_from_slice(&x[..6]);
    out[6..].copy_from_slice(&plus);
    out
}

/// Jump map: positions kept, velocities reset for the target mode.
/// Returns the post-impact state and the impulse `Λ`.
pub fn jump(params: &PendulumParams, x_minus: &BsaState, target: BsaMode) -> Result<(BsaState, Vec<f64>)> {
    let pi = big_inertia(&x_minus.q(), params);
    let (plus, impulse) = impact_map(&pi, &target.constraint(), &x_minus.xidot)?;
    Ok((
        BsaState {
            xidot: plus,
            mode: target,
            ..*x_minus
        },
        impulse,
    ))
}

/// Kinetic energy in the `Π` metric, `½ ξ̇ᵀ Π ξ̇`.
pub fn kinetic_metric(pi: &Mat4<f64>, v: &Vec4<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += v[i] * pi[i][j] * v[j];
        }
    }
    0.5 * s
}

/// One constant-mode segment of a switching signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub mode: BsaMode,
    /// Duration `T_p` [s].
    pub duration: f64,
}

/// User-commanded switching signal: an ordered list of modes with their
/// durations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchingSignal {
    pub stages: Vec<Stage>,
}

impl SwitchingSignal {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        let s = Self { stages };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidSchedule("switching signal has no stages".into()));
        }
        for (i, st) in self.stages.iter().enumerate() {
            if !(st.duration >= 0.0) || !st.duration.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "stage {i} has invalid duration {}",
                    st.duration
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Absolute switching instants between consecutive stages.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for st in &self.stages[..self.stages.len().saturating_sub(1)] {
            t += st.duration;
            out.push(t);
        }
        out
    }

    pub fn mode_at(&self, t: f64) -> BsaMode {
        let mut acc = 0.0;
        for st in &self.stages {
            acc += st.duration;
            if t < acc {
                return st.mode;
            }
        }
        self.stages.last().map(|s| s.mode).unwrap_or(BsaMode::SeaSea)
    }
}
