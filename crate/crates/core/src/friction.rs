//! Friction-disc model of the switch-and-hold mechanism.
//!
//! Each joint has a braking clutch (spring output to ground) and a
//! connecting clutch (spring output to link), four clutches in total:
//!
//! | clutch | relative velocity  | Γ            |
//! |--------|--------------------|--------------|
//! | A      | `ψ̇1`              | `(1,0,0,0)`  |
//! | B      | `ψ̇1 − q̇1`         | `(1,0,−1,0)` |
//! | C      | `ψ̇2`              | `(0,1,0,0)`  |
//! | D      | `ψ̇2 − q̇2`         | `(0,1,0,−1)` |
//!
//! A sticking clutch transmits whatever torque keeps its relative velocity
//! at zero; a slipping clutch transmits the Coulomb torque `−sign(g) M(t)`.
//! Mode changes are state dependent and never introduce jumps.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::dynamics::{big_inertia, extended_bias, spring_torque, Mat4, Vec4};
use crate::error::{Error, Result};
use crate::hybrid::{ConstraintMatrix, STATE_DIM};
use crate::linalg::SmallLdl;
use crate::params::PendulumParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClutchId {
    A,
    B,
    C,
    D,
}

impl ClutchId {
    pub const ALL: [ClutchId; 4] = [ClutchId::A, ClutchId::B, ClutchId::C, ClutchId::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn joint(self) -> usize {
        match self {
            ClutchId::A | ClutchId::B => 0,
            ClutchId::C | ClutchId::D => 1,
        }
    }

    pub fn is_brake(self) -> bool {
        matches!(self, ClutchId::A | ClutchId::C)
    }

    /// The other clutch of the same joint.
    pub fn partner(self) -> ClutchId {
        match self {
            ClutchId::A => ClutchId::B,
            ClutchId::B => ClutchId::A,
            ClutchId::C => ClutchId::D,
            ClutchId::D => ClutchId::C,
        }
    }

    /// Jacobian row `Γ_i = ∂g_i/∂ξ`.
    pub fn jacobian(self) -> [f64; 4] {
        match self {
            ClutchId::A => [1.0, 0.0, 0.0, 0.0],
            ClutchId::B => [1.0, 0.0, -1.0, 0.0],
            ClutchId::C => [0.0, 1.0, 0.0, 0.0],
            ClutchId::D => [0.0, 1.0, 0.0, -1.0],
        }
    }

    /// Relative velocity `g_i = Γ_i ξ̇`.
    pub fn relative_velocity<S: Scalar>(self, xidot: &Vec4<S>) -> S {
        let row = self.jacobian();
        let mut g = S::zero();
        for j in 0..4 {
            if row[j] != 0.0 {
                g += xidot[j] * row[j];
            }
        }
        g
    }

    pub fn name(self) -> &'static str {
        match self {
            ClutchId::A => "A",
            ClutchId::B => "B",
            ClutchId::C => "C",
            ClutchId::D => "D",
        }
    }
}

impl std::str::FromStr for ClutchId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ClutchId::A),
            "B" => Ok(ClutchId::B),
            "C" => Ok(ClutchId::C),
            "D" => Ok(ClutchId::D),
            other => Err(Error::Config(format!("unknown clutch `{other}`"))),
        }
    }
}

pub fn relative_velocity(i: ClutchId, xidot: &Vec4<f64>) -> f64 {
    i.relative_velocity(xidot)
}

pub fn clutch_jacobian(i: ClutchId) -> [f64; 4] {
    i.jacobian()
}

/// Sticking sets of the nine admissible friction modes, indexed `1..=9`.
const MODE_TABLE: [[bool; 4]; 9] = [
    [false, false, false, false],
    [true, false, false, false],
    [false, true, false, false],
    [false, false, true, false],
    [false, false, false, true],
    [true, false, true, false],
    [true, false, false, true],
    [false, true, true, false],
    [false, true, false, true],
];

/// One of the nine admissible sticking/slipping combinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrictionMode {
    index: usize,
}

impl FrictionMode {
    pub fn from_index(p: usize) -> Result<Self> {
        if (1..=9).contains(&p) {
            Ok(Self { index: p })
        } else {
            Err(Error::UnknownMode(p))
        }
    }

    /// Mode whose sticking set is exactly `sticking`, if admissible.
    pub fn from_sticking(sticking: [bool; 4]) -> Option<Self> {
        MODE_TABLE
            .iter()
            .position(|s| *s == sticking)
            .map(|i| Self { index: i + 1 })
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn sticking_mask(self) -> [bool; 4] {
        MODE_TABLE[self.index - 1]
    }

    pub fn is_sticking(self, i: ClutchId) -> bool {
        self.sticking_mask()[i.index()]
    }

    pub fn sticking(self) -> Vec<ClutchId> {
        ClutchId::ALL.into_iter().filter(|c| self.is_sticking(*c)).collect()
    }

    pub fn slipping(self) -> Vec<ClutchId> {
        ClutchId::ALL.into_iter().filter(|c| !self.is_sticking(*c)).collect()
    }

    pub fn with(self, i: ClutchId, stick: bool) -> Option<Self> {
        let mut m = self.sticking_mask();
        m[i.index()] = stick;
        Self::from_sticking(m)
    }
}

impl std::fmt::Display for FrictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.sticking().iter().map(|c| c.name()).collect();
        write!(f, "{}{{{}}}", self.index, names.join(","))
    }
}

/// Coulomb parameters. Clutch torque capacities `M_i = μ_d R F_n,i` are
/// commanded directly, so only the static-to-dynamic ratio enters the
/// dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionParams {
    pub mu_d: f64,
    pub mu_s: f64,
    /// Effective friction radius [m].
    pub radius: f64,
    /// A clutch that just broke loose may not re-stick for this long [s].
    pub min_dwell: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            mu_d: 1.0,
            mu_s: 1.0,
            radius: 1.0,
            min_dwell: 1e-4,
        }
    }
}

impl FrictionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, r: &str| Error::InvalidParameter {
            field: f.into(),
            reason: r.into(),
        };
        if !(self.mu_d > 0.0) {
            return Err(bad("mu_d", "must be positive"));
        }
        if !(self.mu_s >= self.mu_d) {
            return Err(bad("mu_s", "must be at least mu_d"));
        }
        if !(self.radius > 0.0) {
            return Err(bad("radius", "must be positive"));
        }
        if !(self.min_dwell >= 0.0) {
            return Err(bad("min_dwell", "must be nonnegative"));
        }
        Ok(())
    }

    /// Break-away torque relative to the dynamic capacity.
    pub fn static_ratio(&self) -> f64 {
        self.mu_s / self.mu_d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClutchAction {
    Engage,
    Disengage,
}

/// Command timeline of one clutch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutchTimeline {
    #[serde(default)]
    pub initially_engaged: bool,
    #[serde(default)]
    pub commands: Vec<(f64, ClutchAction)>,
}

/// Ramped torque-capacity commands for all four clutches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutchSchedule {
    /// Peak capacity `M_max` [N·m].
    pub m_max: f64,
    /// Ramp time from 0 to `M_max` [s].
    pub t_connect: f64,
    /// Ramp time from `M_max` to 0 [s].
    pub t_separate: f64,
    /// Timelines in clutch order A, B, C, D.
    pub clutches: [ClutchTimeline; 4],
}

impl ClutchSchedule {
    /// Holds the clutches of `initial` sticking-style engagement forever.
    pub fn constant(engaged: [bool; 4], m_max: f64) -> Self {
        let mk = |e: bool| ClutchTimeline {
            initially_engaged: e,
            commands: vec![],
        };
        Self {
            m_max,
            t_connect: 0.02,
            t_separate: 0.02,
            clutches: [mk(engaged[0]), mk(engaged[1]), mk(engaged[2]), mk(engaged[3])],
        }
    }

    /// Schedule of a clutch-and-hold mode sequence: at each switching time
    /// the clutches are commanded to the configuration of the next mode.
    pub fn from_mode_sequence(
        modes: &[crate::hybrid::BsaMode],
        switch_times: &[f64],
        m_max: f64,
        t_connect: f64,
        t_separate: f64,
    ) -> Result<Self> {
        if modes.len() != switch_times.len() + 1 {
            return Err(Error::InvalidSchedule(
                "need exactly one switching time between consecutive modes".into(),
            ));
        }
        let engaged = |m: crate::hybrid::BsaMode| {
            let (c1, c2) = m.clutches();
            [!c1, c1, !c2, c2]
        };
        let first = engaged(modes[0]);
        let mut clutches: [ClutchTimeline; 4] = Default::default();
        for i in 0..4 {
            clutches[i].initially_engaged = first[i];
        }
        let mut prev = first;
        for (m, &t) in modes[1..].iter().zip(switch_times) {
            let next = engaged(*m);
            for i in 0..4 {
                if next[i] != prev[i] {
                    let action = if next[i] {
                        ClutchAction::Engage
                    } else {
                        ClutchAction::Disengage
                    };
                    clutches[i].commands.push((t, action));
                }
            }
            prev = next;
        }
        let s = Self {
            m_max,
            t_connect,
            t_separate,
            clutches,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_max >= 0.0) || !self.m_max.is_finite() {
            return Err(Error::InvalidSchedule(
                "m_max must be a finite nonnegative torque".into(),
            ));
        }
        if !(self.t_connect > 0.0) || !(self.t_separate > 0.0) {
            return Err(Error::InvalidSchedule("ramp times must be positive".into()));
        }
        for (i, c) in self.clutches.iter().enumerate() {
            if c.commands.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(Error::InvalidSchedule(format!(
                    "commands of clutch {} are not sorted in time",
                    ClutchId::ALL[i].name()
                )));
            }
            if c.commands.iter().any(|(t, _)| !t.is_finite()) {
                return Err(Error::InvalidSchedule("non-finite command time".into()));
            }
        }
        // commanded engagement must never hold both clutches of a joint
        let mut times: Vec<f64> = vec![f64::NEG_INFINITY];
        times.extend(self.clutches.iter().flat_map(|c| c.commands.iter().map(|(t, _)| *t)));
        times.sort_by(f64::total_cmp);
        for t in times {
            let e = self.commanded_after(t);
            for (brake, conn) in [(0, 1), (2, 3)] {
                if e[brake] && e[conn] {
                    return Err(Error::InvalidSchedule(format!(
                        "clutches {} and {} are both commanded engaged at t = {t}",
                        ClutchId::ALL[brake].name(),
                        ClutchId::ALL[conn].name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Commanded engagement state after all commands at or before `t`.
    pub fn commanded_after(&self, t: f64) -> [bool; 4] {
        let mut out = [false; 4];
        for (i, c) in self.clutches.iter().enumerate() {
            let mut e = c.initially_engaged;
            for (tc, a) in &c.commands {
                if *tc <= t {
                    e = *a == ClutchAction::Engage;
                }
            }
            out[i] = e;
        }
        out
    }

    /// Torque capacity `M_i(t)` of clutch `i`.
    pub fn capacity(&self, i: ClutchId, t: f64) -> f64 {
        let c = &self.clutches[i.index()];
        let up = self.m_max / self.t_connect;
        let down = self.m_max / self.t_separate;
        let mut level = if c.initially_engaged { self.m_max } else { 0.0 };
        let mut rate = 0.0;
        let mut t0 = f64::NEG_INFINITY;
        for (tc, a) in &c.commands {
            if *tc > t {
                break;
            }
            if t0.is_finite() {
                level = (level + rate * (tc - t0)).clamp(0.0, self.m_max);
            }
            rate = match a {
                ClutchAction::Engage => up,
                ClutchAction::Disengage => -down,
            };
            t0 = *tc;
        }
        if t0.is_finite() {
            level = (level + rate * (t - t0)).clamp(0.0, self.m_max);
        }
        level
    }

    pub fn capacities(&self, t: f64) -> [f64; 4] {
        [
            self.capacity(ClutchId::A, t),
            self.capacity(ClutchId::B, t),
            self.capacity(ClutchId::C, t),
            self.capacity(ClutchId::D, t),
        ]
    }

    /// Kinks of the piecewise-linear capacity profiles.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.clutches {
            for (t, a) in &c.commands {
                out.push(*t);
                out.push(
                    t + match a {
                        ClutchAction::Engage => self.t_connect,
                        ClutchAction::Disengage => self.t_separate,
                    },
                );
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Shifts every command by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Self {
        let mut s = self.clone();
        for c in &mut s.clutches {
            for cmd in &mut c.commands {
                cmd.0 += dt;
            }
        }
        s
    }
}

/// Coulomb torque of a slipping clutch, `−sign(g) M`.
pub fn dynamic_torque(g: f64, capacity: f64) -> f64 {
    if g > 0.0 {
        -capacity
    } else if g < 0.0 {
        capacity
    } else {
        0.0
    }
}

fn rows_of(set: &[ClutchId]) -> ConstraintMatrix {
    ConstraintMatrix::from_rows(set.iter().map(|c| c.jacobian()).collect())
}

/// Static contact torques of all sticking clutches, solved simultaneously:
/// `ζ_s = (G Π⁻¹ Gᵀ)⁻¹ G Π⁻¹ (η − τ_k − f_a)` with `G` the stacked Jacobians
/// and `f_a` the generalized force of the slipping clutches.
pub fn static_torques(
    pi: &Mat4<f64>,
    sticking: &[ClutchId],
    tau_k: &Vec4<f64>,
    eta: &Vec4<f64>,
    applied: &Vec4<f64>,
) -> Result<Vec<f64>> {
    if sticking.is_empty() {
        return Ok(vec![]);
    }
    let flat: Vec<f64> = pi.iter().flat_map(|r| r.iter().copied()).collect();
    let ldl = SmallLdl::factor(&flat, 4).ok_or(Error::SingularConstraint("static torque"))?;
    let g = rows_of(sticking);
    let r = g.num_rows();
    let forcing: Vec<f64> = (0..4).map(|j| eta[j] - tau_k[j] - applied[j]).collect();
    let pinv_f = ldl.solve(&forcing);
    let b = g.apply(&[pinv_f[0], pinv_f[1], pinv_f[2], pinv_f[3]]);
    let mut schur = vec![0.0; r * r];
    for (i, row) in g.rows().iter().enumerate() {
        let col = ldl.solve(row);
        let gi = g.apply(&[col[0], col[1], col[2], col[3]]);
        for j in 0..r {
            schur[j * r + i] = gi[j];
        }
    }
    let s = SmallLdl::factor(&schur, r).ok_or(Error::SingularConstraint("static torque"))?;
    Ok(s.solve(&b))
}

/// Static torque of a single sticking clutch with no other contacts.
pub fn static_torque(i: ClutchId, pi: &Mat4<f64>, tau_k: &Vec4<f64>, eta: &Vec4<f64>) -> Result<f64> {
    Ok(static_torques(pi, &[i], tau_k, eta, &[0.0; 4])?[0])
}

/// Contact torques of every clutch at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactTorques {
    /// Torque per clutch (static for sticking, Coulomb for slipping).
    pub torque: [f64; 4],
    /// Relative velocities `g_i`.
    pub slip: [f64; 4],
}

impl ContactTorques {
    /// Frictional power `Σ ζ_d,i g_i` of the slipping clutches (≤ 0).
    pub fn dissipation(&self, mode: FrictionMode) -> f64 {
        mode.slipping()
            .iter()
            .map(|c| self.torque[c.index()] * self.slip[c.index()])
            .sum()
    }
}

/// State derivative in friction mode `mode` plus the contact torques, with
/// no consistency check on the sticking set.
pub fn friction_flow_unchecked(
    params: &PendulumParams,
    x: &[f64; STATE_DIM],
    u: &[f64; 2],
    mode: FrictionMode,
    capacities: &[f64; 4],
) -> Result<([f64; STATE_DIM], ContactTorques)> {
    let xid = [x[6], x[7], x[8], x[9]];
    let dirs = ClutchId::ALL.map(|c| {
        let g = c.relative_velocity(&xid);
        if g > 0.0 {
            1.0
        } else if g < 0.0 {
            -1.0
        } else {
            0.0
        }
    });
    friction_flow_directed(params, x, u, mode, capacities, &dirs)
}

/// Like [`friction_flow_unchecked`], but slipping clutch `i` applies
/// `−directions[i] · M_i` whatever the current sign of its slip. An
/// integrator holding the directions fixed between localized zero crossings
/// never sees the Coulomb discontinuity inside a step.
pub fn friction_flow_directed(
    params: &PendulumParams,
    x: &[f64; STATE_DIM],
    u: &[f64; 2],
    mode: FrictionMode,
    capacities: &[f64; 4],
    directions: &[f64; 4],
) -> Result<([f64; STATE_DIM], ContactTorques)> {
    let theta = [x[0], x[1]];
    let xi = [x[2], x[3], x[4], x[5]];
    let xid = [x[6], x[7], x[8], x[9]];
    let pi = big_inertia(&[xi[2], xi[3]], params);
    let eta = extended_bias(&xi, &xid, params);
    let tau = spring_torque(&theta, &[xi[0], xi[1]], &params.stiffness());

    let mut contacts = ContactTorques::default();
    let mut applied = [0.0; 4];
    for c in ClutchId::ALL {
        contacts.slip[c.index()] = c.relative_velocity(&xid);
    }
    for c in mode.slipping() {
        let z = -directions[c.index()] * capacities[c.index()];
        contacts.torque[c.index()] = z;
        let row = c.jacobian();
        for j in 0..4 {
            applied[j] += row[j] * z;
        }
    }
    let sticking = mode.sticking();
    let zs = static_torques(&pi, &sticking, &tau, &eta, &applied)?;
    let mut gen = applied;
    for (c, z) in sticking.iter().zip(&zs) {
        contacts.torque[c.index()] = *z;
        let row = c.jacobian();
        for j in 0..4 {
            gen[j] += row[j] * z;
        }
    }
    let rhs: Vec<f64> = (0..4).map(|j| gen[j] + tau[j] - eta[j]).collect();
    let flat: Vec<f64> = pi.iter().flat_map(|r| r.iter().copied()).collect();
    let acc = SmallLdl::factor(&flat, 4)
        .ok_or(Error::SingularConstraint("friction flow"))?
        .solve(&rhs);
    let mut xd = [0.0; STATE_DIM];
    xd[..2].copy_from_slice(u);
    xd[2..6].copy_from_slice(&xid);
    xd[6..].copy_from_slice(&acc);
    Ok((xd, contacts))
}

/// Checked friction flow: every sticking clutch must have `|g_i| ≤ tol`.
pub fn friction_flow(
    params: &PendulumParams,
    x: &[f64; STATE_DIM],
    u: &[f64; 2],
    mode: FrictionMode,
    capacities: &[f64; 4],
    tol: f64,
) -> Result<([f64; STATE_DIM], ContactTorques)> {
    let xid = [x[6], x[7], x[8], x[9]];
    for c in mode.sticking() {
        let g = c.relative_velocity(&xid).abs();
        if g > tol {
            return Err(Error::ConstraintViolation { residual: g, tol });
        }
    }
    friction_flow_unchecked(params, x, u, mode, capacities)
}

/// Whether a sticking clutch breaks loose.
pub fn breaks_loose(required: f64, capacity: f64, static_ratio: f64) -> bool {
    required.abs() > static_ratio * capacity
}

/// Whether a clutch whose slip just vanished can hold.
pub fn can_stick(required: f64, capacity: f64) -> bool {
    capacity > 0.0 && required.abs() <= capacity
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    Stick,
    Slip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub from: FrictionMode,
    pub to: FrictionMode,
    pub changes: Vec<(ClutchId, TransitionKind)>,
}

/// Guard evaluation at state `x`.
///
/// Sticking clutches whose holding torque exceeds the break-away torque
/// start slipping. A slipping clutch in `slip_zero` (whose relative velocity
/// was localized at a zero crossing) starts sticking when the resulting
/// mode is admissible and every sticking clutch can hold its torque.
pub fn guard_check(
    params: &PendulumParams,
    friction: &FrictionParams,
    x: &[f64; STATE_DIM],
    mode: FrictionMode,
    capacities: &[f64; 4],
    slip_zero: &[ClutchId],
) -> Result<Option<Transition>> {
    let u = [0.0, 0.0];
    let ratio = friction.static_ratio();
    let mut current = mode;
    let mut changes = Vec::new();

    // stick -> slip, removing the worst violator until consistent
    loop {
        let (_, ct) = friction_flow_unchecked(params, x, &u, current, capacities)?;
        let worst = current
            .sticking()
            .into_iter()
            .filter(|c| breaks_loose(ct.torque[c.index()], capacities[c.index()], ratio))
            .max_by(|a, b| {
                let ea = ct.torque[a.index()].abs() - ratio * capacities[a.index()];
                let eb = ct.torque[b.index()].abs() - ratio * capacities[b.index()];
                ea.total_cmp(&eb)
            });
        match worst {
            Some(c) => {
                current = current
                    .with(c, false)
                    .expect("removing a sticking contact is admissible");
                changes.push((c, TransitionKind::Slip));
            }
            None => break,
        }
    }

    // slip -> stick at localized zero crossings
    for &c in slip_zero {
        if current.is_sticking(c) {
            continue;
        }
        let Some(candidate) = current.with(c, true) else {
            continue;
        };
        let (_, ct) = friction_flow_unchecked(params, x, &u, candidate, capacities)?;
        let holds = candidate
            .sticking()
            .iter()
            .all(|s| can_stick(ct.torque[s.index()], capacities[s.index()]));
        if holds {
            current = candidate;
            changes.push((c, TransitionKind::Stick));
        }
    }

    Ok(if current == mode {
        None
    } else {
        Some(Transition {
            from: mode,
            to: current,
            changes,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::BsaMode;

    fn identity() -> Mat4<f64> {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        m
    }

    #[test]
    fn relative_velocities() {
        let v = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(relative_velocity(ClutchId::A, &v), 1.0);
        assert_eq!(relative_velocity(ClutchId::B, &v), 0.0);
        assert_eq!(relative_velocity(ClutchId::C, &v), 0.0);
        assert_eq!(relative_velocity(ClutchId::D, &v), 0.0);
        for c in ClutchId::ALL {
            assert_eq!(c.relative_velocity(&[0.0; 4]), 0.0);
        }
    }

    #[test]
    fn jacobians_match_ideal_constraint_rows() {
        let dec_dec = BsaMode::DecDec.constraint();
        let sea_sea = BsaMode::SeaSea.constraint();
        assert_eq!(clutch_jacobian(ClutchId::A), dec_dec.rows()[0]);
        assert_eq!(clutch_jacobian(ClutchId::C), dec_dec.rows()[1]);
        assert_eq!(clutch_jacobian(ClutchId::B), sea_sea.rows()[0]);
        assert_eq!(clutch_jacobian(ClutchId::D), sea_sea.rows()[1]);
    }

    #[test]
    fn mode_table_is_complete_and_exclusive() {
        let mut seen = std::collections::HashSet::new();
        for p in 1..=9 {
            let m = FrictionMode::from_index(p).unwrap();
            let s = m.sticking_mask();
            assert!(seen.insert(s));
            assert!(!(s[0] && s[1]) && !(s[2] && s[3]));
            assert_eq!(m.sticking().len() + m.slipping().len(), 4);
        }
        assert!(FrictionMode::from_index(10).is_err());
        assert!(FrictionMode::from_sticking([true, true, false, false]).is_none());
        assert_eq!(
            FrictionMode::from_sticking([false, true, true, false]).unwrap().index(),
            8
        );
    }

    #[test]
    fn coulomb_torque() {
        assert_eq!(dynamic_torque(-0.3, 30.0), 30.0);
        assert_eq!(dynamic_torque(0.3, 30.0), -30.0);
        assert_eq!(dynamic_torque(0.3, 0.0), 0.0);
    }

    #[test]
    fn static_torque_examples() {
        let z = [0.0; 4];
        assert_eq!(static_torque(ClutchId::A, &identity(), &z, &z).unwrap(), 0.0);
        let f = 2.5;
        let zeta = static_torque(ClutchId::A, &identity(), &z, &[f, 0.0, 0.0, 0.0]).unwrap();
        assert!((zeta - f).abs() < 1e-15);
    }

    #[test]
    fn static_torques_hold_relative_velocity() {
        let p = PendulumParams::default();
        let x = [0.2, 0.3, 0.05, -0.1, 0.4, 0.7, 0.0, 1.1, 0.9, 1.1];
        for mode_idx in [6, 7, 8, 9] {
            let mode = FrictionMode::from_index(mode_idx).unwrap();
            let (xd, _) = friction_flow_unchecked(&p, &x, &[1.0, -1.0], mode, &[30.0; 4]).unwrap();
            let acc = [xd[6], xd[7], xd[8], xd[9]];
            for c in mode.sticking() {
                assert!(c.relative_velocity(&acc).abs() < 1e-10, "mode {mode_idx} clutch {c:?}");
            }
        }
    }

    #[test]
    fn capacity_ramps() {
        let s = ClutchSchedule::from_mode_sequence(&[BsaMode::SeaDec, BsaMode::DecSea], &[0.147], 30.0, 0.02, 0.02)
            .unwrap();
        // SEA-DEC engages B (connect 1) and C (brake 2)
        assert_eq!(s.capacities(0.0), [0.0, 30.0, 30.0, 0.0]);
        let mid = s.capacities(0.157);
        for (v, e) in mid.iter().zip([15.0, 15.0, 15.0, 15.0]) {
            assert!((v - e).abs() < 1e-9);
        }
        assert_eq!(s.capacities(0.2), [30.0, 0.0, 0.0, 30.0]);
        assert_eq!(s.breakpoints().len(), 2);
    }

    #[test]
    fn rejects_simultaneous_engagement_of_one_joint() {
        let mut s = ClutchSchedule::constant([false, true, true, false], 30.0);
        s.clutches[0].commands.push((0.1, ClutchAction::Engage));
        assert!(matches!(s.validate(), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn guard_thresholds() {
        assert!(breaks_loose(31.0, 30.0, 1.0));
        assert!(!breaks_loose(29.0, 30.0, 1.0));
        assert!(can_stick(10.0, 30.0));
        assert!(!can_stick(31.0, 30.0));
        assert!(!can_stick(0.0, 0.0));
    }

    #[test]
    fn guard_check_detects_break_away() {
        // brake A holds a spring wound by 0.31 rad: 31 N·m against 30 N·m
        let p = PendulumParams::default().with_stiffness([100.0, 100.0]);
        let mut x = [0.0; STATE_DIM];
        x[0] = 0.31;
        let mode = FrictionMode::from_index(2).unwrap();
        let caps = [30.0, 0.0, 0.0, 0.0];
        let tr = guard_check(&p, &FrictionParams::default(), &x, mode, &caps, &[])
            .unwrap()
            .unwrap();
        assert_eq!(tr.to.index(), 1);
        assert_eq!(tr.changes, vec![(ClutchId::A, TransitionKind::Slip)]);

        x[0] = 0.10;
        assert!(guard_check(&p, &FrictionParams::default(), &x, mode, &caps, &[])
            .unwrap()
            .is_none());
        // slipping A with 10 N·m required re-sticks at a zero crossing
        let open = FrictionMode::from_index(1).unwrap();
        let tr = guard_check(&p, &FrictionParams::default(), &x, open, &caps, &[ClutchId::A])
            .unwrap()
            .unwrap();
        assert_eq!(tr.to.index(), 2);
    }
}
