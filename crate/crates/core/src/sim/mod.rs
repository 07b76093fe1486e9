//! Deterministic simulation of the clutch-switched, variable-stiffness and
//! friction-clutch models.
//!
//! All simulators integrate an augmented state that carries the actuator
//! work per joint (and, for the friction model, the energy dissipated in
//! slipping clutches), so that energy balances can be checked without
//! quadrature error.

mod input;
mod integrator;
mod trajectory;

pub use input::InputSchedule;
pub use integrator::{dopri_step, integrate, rk4_step, IntegratorConfig, Method};
pub use trajectory::{Event, EventKind, ModeLabel, ModelKind, Sample, Trajectory, TrajectorySummary};

use serde::{Deserialize, Serialize};

use crate::dynamics::big_inertia;
use crate::dynamics::{energy, tcp_velocity, vsa_energy};
use crate::error::{Error, Result};
use crate::friction::friction_flow_directed;
use crate::friction::{guard_check, ClutchId, ClutchSchedule, FrictionMode, FrictionParams, TransitionKind};
use crate::hybrid::{self, flow_unchecked, kinetic_metric, BsaMode, BsaState, SwitchingSignal};
use crate::params::PendulumParams;
use crate::power::{spring_energy_rate_bsa, spring_energy_rate_vsa, PowerSample};
use crate::vsa::{vsa_flow_vector, VsaState};

/// Power flow of the clutch-switched joints at state `x` under motor
/// velocities `u`.
pub fn bsa_power(params: &PendulumParams, t: f64, x: &[f64], u: &[f64]) -> PowerSample {
    let k = params.stiffness();
    let mut p_out = [0.0; 2];
    let mut es_dot = [0.0; 2];
    for j in 0..2 {
        let tau = k[j] * (x[j] - x[2 + j]);
        p_out[j] = tau * x[6 + j];
        es_dot[j] = spring_energy_rate_bsa(x[j], x[2 + j], u[j], x[6 + j], k[j]);
    }
    PowerSample::new(t, p_out, es_dot)
}

/// Power flow of the variable-stiffness joints.
pub fn vsa_power(t: f64, x: &[f64], u: &[f64]) -> PowerSample {
    let mut p_out = [0.0; 2];
    let mut es_dot = [0.0; 2];
    for j in 0..2 {
        let tau = x[2 + j] * (x[j] - x[4 + j]);
        p_out[j] = tau * x[6 + j];
        es_dot[j] = spring_energy_rate_vsa(x[j], x[4 + j], u[j], x[6 + j], x[2 + j], u[2 + j]);
    }
    PowerSample::new(t, p_out, es_dot)
}

#[allow(clippy::too_many_arguments)]
fn bsa_like_sample(
    params: &PendulumParams,
    t: f64,
    xa: &[f64],
    u_left: &[f64],
    u_right: &[f64],
    mode: ModeLabel,
    dissipated: f64,
) -> Sample {
    let x = &xa[..10];
    let theta = [x[0], x[1]];
    let xi = [x[2], x[3], x[4], x[5]];
    let xid = [x[6], x[7], x[8], x[9]];
    Sample {
        t,
        x: x.to_vec(),
        u: u_right.to_vec(),
        mode,
        energy: energy(&theta, &xi, &xid, &params.stiffness(), params),
        power_left: bsa_power(params, t, x, u_left),
        power: bsa_power(params, t, x, u_right),
        v_tcp: tcp_velocity(&[x[4], x[5]], &[x[8], x[9]], params).1,
        work: [xa[10], xa[11]],
        dissipated,
    }
}

fn vsa_sample(params: &PendulumParams, t: f64, xa: &[f64], u_left: &[f64], u_right: &[f64]) -> Sample {
    let x = &xa[..8];
    Sample {
        t,
        x: x.to_vec(),
        u: u_right.to_vec(),
        mode: ModeLabel::Smooth,
        energy: vsa_energy(&[x[0], x[1]], &[x[2], x[3]], &[x[4], x[5]], &[x[6], x[7]], params),
        power_left: vsa_power(t, x, u_left),
        power: vsa_power(t, x, u_right),
        v_tcp: tcp_velocity(&[x[4], x[5]], &[x[6], x[7]], params).1,
        work: [xa[8], xa[9]],
        dissipated: 0.0,
    }
}

/// Motor work rate `K(θ − ψ) θ̇` per joint.
fn bsa_work_rate(params: &PendulumParams, x: &[f64], u: &[f64]) -> [f64; 2] {
    let k = params.stiffness();
    [k[0] * (x[0] - x[2]) * u[0], k[1] * (x[1] - x[3]) * u[1]]
}

fn knots(inputs: &InputSchedule, extra: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut k = inputs.breakpoints_in(a, b);
    k.extend(extra.iter().copied().filter(|&t| t > a && t < b));
    k.push(b);
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// Ideal clutch model: integrates each stage of `sigma` under the motor
/// velocities `inputs` and applies the impulsive jump at every stage
/// boundary.
pub fn simulate_bsa(
    params: &PendulumParams,
    x0: &BsaState,
    inputs: &InputSchedule,
    sigma: &SwitchingSignal,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    sigma.validate()?;
    if inputs.dim() != hybrid::INPUT_DIM {
        return Err(Error::InvalidSchedule(format!(
            "expected {} motor inputs, got {}",
            hybrid::INPUT_DIM,
            inputs.dim()
        )));
    }
    if x0.mode != sigma.stages[0].mode {
        return Err(Error::InvalidSchedule(format!(
            "initial state is in mode {} but the schedule starts in {}",
            x0.mode, sigma.stages[0].mode
        )));
    }
    let residual = x0.constraint_residual();
    if residual > cfg.constraint_tol {
        return Err(Error::ConstraintViolation {
            residual,
            tol: cfg.constraint_tol,
        });
    }

    let mut traj = Trajectory::new(ModelKind::Bsa);
    let mut xa: Vec<f64> = x0.to_vector().to_vec();
    xa.extend([0.0, 0.0]);
    let mut dissipated = 0.0;
    let mut t = x0.t;
    let u0 = inputs.value_at(t);
    traj.push(bsa_like_sample(params, t, &xa, u0, u0, ModeLabel::Bsa(x0.mode), 0.0));

    for (si, stage) in sigma.stages.iter().enumerate() {
        let mode = stage.mode;
        let c = mode.constraint();
        let t_end = t + stage.duration;
        let mut a = t;
        for b in knots(inputs, &[], t, t_end) {
            let u: Vec<f64> = inputs.value_at(a).to_vec();
            let mut f = |_: f64, x: &[f64]| {
                let xd = flow_unchecked(params, mode, &x[..10], &u);
                let w = bsa_work_rate(params, x, &u);
                let mut out = xd.to_vec();
                out.extend(w);
                Ok(out)
            };
            let mut count = 0usize;
            xa = integrate(&mut f, a, b, &xa, cfg, |te, xs| {
                let drift = c
                    .apply(&[xs[6], xs[7], xs[8], xs[9]])
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                if drift > cfg.constraint_tol {
                    return Err(Error::ConstraintViolation {
                        residual: drift,
                        tol: cfg.constraint_tol,
                    });
                }
                count += 1;
                if count % cfg.sample_stride == 0 || te == b {
                    let ur = inputs.value_at(te);
                    traj.push(bsa_like_sample(
                        params,
                        te,
                        xs,
                        &u,
                        ur,
                        ModeLabel::Bsa(mode),
                        dissipated,
                    ));
                }
                Ok(())
            })?;
            a = b;
        }
        t = t_end;
        if let Some(next) = sigma.stages.get(si + 1) {
            let before = BsaState::from_vector(&xa[..10], mode, t);
            let (after, impulse) = hybrid::jump(params, &before, next.mode)?;
            let pi = big_inertia(&before.q(), params);
            dissipated += kinetic_metric(&pi, &before.xidot) - kinetic_metric(&pi, &after.xidot);
            xa[6..10].copy_from_slice(&after.xidot);
            traj.events.push(Event {
                t,
                kind: EventKind::ScheduledSwitch,
                before: ModeLabel::Bsa(mode),
                after: ModeLabel::Bsa(next.mode),
                impulse: None,
                clutch: None,
            });
            traj.events.push(Event {
                t,
                kind: EventKind::Impulse,
                before: ModeLabel::Bsa(mode),
                after: ModeLabel::Bsa(next.mode),
                impulse: Some(impulse),
                clutch: None,
            });
            let ul = inputs.value_left(t);
            let ur = inputs.value_at(t);
            let mut s = bsa_like_sample(params, t, &xa, ul, ur, ModeLabel::Bsa(next.mode), dissipated);
            if let Some(prev) = traj.samples.last() {
                if prev.t == t {
                    s.power_left = prev.power_left;
                }
            }
            traj.push(s);
        }
    }
    Ok(traj)
}

/// Variable-stiffness model over `[x0 time = 0, horizon]`. Stiffness is
/// clamped at zero from below after every step.
pub fn simulate_vsa(
    params: &PendulumParams,
    x0: &VsaState,
    inputs: &InputSchedule,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if inputs.dim() != crate::vsa::INPUT_DIM {
        return Err(Error::InvalidSchedule(format!(
            "expected {} inputs, got {}",
            crate::vsa::INPUT_DIM,
            inputs.dim()
        )));
    }
    if x0.k.iter().any(|k| *k < 0.0) {
        return Err(Error::InvalidParameter {
            field: "k".into(),
            reason: "initial stiffness must be nonnegative".into(),
        });
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidSchedule("negative horizon".into()));
    }
    let mut traj = Trajectory::new(ModelKind::Vsa);
    let mut xa: Vec<f64> = x0.to_vector().to_vec();
    xa.extend([0.0, 0.0]);
    let u0 = inputs.value_at(0.0);
    traj.push(vsa_sample(params, 0.0, &xa, u0, u0));
    let mut warned = false;
    let mut a = 0.0;
    for b in knots(inputs, &[], 0.0, horizon) {
        let u: Vec<f64> = inputs.value_at(a).to_vec();
        let mut f = |_: f64, x: &[f64]| {
            let xd = vsa_flow_vector(params, &x[..8], &u);
            let mut out = xd.to_vec();
            for j in 0..2 {
                let tau = x[2 + j] * (x[j] - x[4 + j]);
                let p_in = tau * x[6 + j] + spring_energy_rate_vsa(x[j], x[4 + j], u[j], x[6 + j], x[2 + j], u[2 + j]);
                out.push(p_in);
            }
            Ok(out)
        };
        // stepping manually so the stiffness clamp applies between steps
        let n = (((b - a) / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for i in 0..n {
            let ts = a + i as f64 * h;
            let te = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
            let sub = IntegratorConfig { dt: te - ts, ..*cfg };
            xa = integrate(&mut f, ts, te, &xa, &sub, |_, _| Ok(()))?;
            for j in 2..4 {
                if xa[j] < 0.0 {
                    if !warned {
                        log::warn!("stiffness clamped at zero at t = {te:.6}");
                        warned = true;
                    }
                    xa[j] = 0.0;
                }
            }
            if (i + 1) % cfg.sample_stride == 0 || te == b {
                let ur = inputs.value_at(te);
                traj.push(vsa_sample(params, te, &xa, &u, ur));
            }
        }
        a = b;
    }
    Ok(traj)
}

fn slip_velocity(x: &[f64], c: ClutchId) -> f64 {
    c.relative_velocity(&[x[6], x[7], x[8], x[9]])
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Watch {
    /// Relative velocity of a slipping clutch.
    Slip(ClutchId),
    /// Torque margin of a sticking clutch.
    Stick(ClutchId),
}

/// Friction-clutch model: integrates the nine-mode hybrid automaton with
/// state-dependent stick/slip transitions. The initial mode sticks every
/// clutch that has capacity and zero relative velocity.
pub fn simulate_friction(
    params: &PendulumParams,
    x0: &[f64; 10],
    inputs: &InputSchedule,
    schedule: &ClutchSchedule,
    friction: &FrictionParams,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    friction.validate()?;
    schedule.validate()?;
    if inputs.dim() != hybrid::INPUT_DIM {
        return Err(Error::InvalidSchedule("expected 2 motor inputs".into()));
    }
    let ratio = friction.static_ratio();
    let mut xa: Vec<f64> = x0.to_vec();
    xa.extend([0.0, 0.0, 0.0]);
    let mut t = 0.0;

    let caps0 = schedule.capacities(t);
    let candidates: Vec<ClutchId> = ClutchId::ALL
        .into_iter()
        .filter(|c| caps0[c.index()] > 0.0 && slip_velocity(x0, *c).abs() <= cfg.constraint_tol)
        .collect();
    let open = FrictionMode::from_index(1)?;
    let mut mode = match guard_check(params, friction, x0, open, &caps0, &candidates)? {
        Some(tr) => tr.to,
        None => open,
    };

    // Coulomb directions of the slipping clutches, held fixed between
    // localized zero crossings; 0 means torque-free
    let mut dirs = [0.0f64; 4];
    for c in mode.slipping() {
        dirs[c.index()] = signum0(slip_velocity(x0, c));
    }

    let rhs = |t: f64, x: &[f64], mode: FrictionMode, dirs: &[f64; 4], u: &[f64]| -> Result<Vec<f64>> {
        let caps = schedule.capacities(t);
        let xs: [f64; 10] = x[..10].try_into().expect("state length");
        let (xd, ct) = friction_flow_directed(params, &xs, &[u[0], u[1]], mode, &caps, dirs)?;
        let mut out = xd.to_vec();
        out.extend(bsa_work_rate(params, x, u));
        out.push(-ct.dissipation(mode));
        Ok(out)
    };
    let watch_values = |t: f64, x: &[f64], mode: FrictionMode, dirs: &[f64; 4], watch: &[Watch]| -> Result<Vec<f64>> {
        let caps = schedule.capacities(t);
        let xs: [f64; 10] = x[..10].try_into().expect("state length");
        let need_torque = watch.iter().any(|w| matches!(w, Watch::Stick(_)));
        let torques = if need_torque {
            friction_flow_directed(params, &xs, &[0.0, 0.0], mode, &caps, dirs)?
                .1
                .torque
        } else {
            [0.0; 4]
        };
        Ok(watch
            .iter()
            .map(|w| match *w {
                Watch::Slip(c) => dirs[c.index()] * slip_velocity(x, c),
                Watch::Stick(c) => ratio * caps[c.index()] - torques[c.index()].abs(),
            })
            .collect())
    };

    let mut traj = Trajectory::new(ModelKind::Friction);
    let u0 = inputs.value_at(t);
    traj.push(bsa_like_sample(params, t, &xa, u0, u0, ModeLabel::Friction(mode), 0.0));
    let mut stick_block = [f64::NEG_INFINITY; 4];
    let mut disarmed_at = [f64::NEG_INFINITY; 4];
    let mut stalled = 0usize;

    let mut a = 0.0;
    for b in knots(inputs, &schedule.breakpoints(), 0.0, horizon) {
        let u: Vec<f64> = inputs.value_at(a).to_vec();
        let n = (((b - a) / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
        let h_nom = (b - a) / n as f64;
        let mut count = 0usize;
        while t < b {
            let h = if b - t <= h_nom * (1.0 + 1e-9) { b - t } else { h_nom };
            let te = if h == b - t { b } else { t + h };
            let caps_a = schedule.capacities(t);
            let caps_b = schedule.capacities(te);
            for c in mode.slipping() {
                let i = c.index();
                if caps_a[i] == 0.0 || (dirs[i] == 0.0 && t > disarmed_at[i]) {
                    dirs[i] = signum0(slip_velocity(&xa, c));
                }
            }
            let d = dirs;
            let mut f = |tt: f64, x: &[f64]| rhs(tt, x, mode, &d, &u);
            let x1 = rk4_step(&mut f, t, &xa, h)?;

            let watch: Vec<Watch> = ClutchId::ALL
                .into_iter()
                .filter_map(|c| {
                    if mode.is_sticking(c) {
                        Some(Watch::Stick(c))
                    } else if dirs[c.index()] != 0.0 && (caps_a[c.index()] > 0.0 || caps_b[c.index()] > 0.0) {
                        Some(Watch::Slip(c))
                    } else {
                        None
                    }
                })
                .collect();
            let e0 = watch_values(t, &xa, mode, &d, &watch)?;
            let e1 = watch_values(te, &x1, mode, &d, &watch)?;
            let crossing: Vec<usize> = (0..watch.len()).filter(|&i| e0[i] >= 0.0 && e1[i] < 0.0).collect();

            if crossing.is_empty() {
                xa = x1;
                t = te;
                count += 1;
                stalled = 0;
                if count % cfg.sample_stride == 0 || t == b {
                    let ur = inputs.value_at(t);
                    traj.push(bsa_like_sample(
                        params,
                        t,
                        &xa,
                        &u,
                        ur,
                        ModeLabel::Friction(mode),
                        xa[12],
                    ));
                }
                check_sticking(&xa, mode, cfg, t)?;
                continue;
            }

            // earliest event in the step
            let mut best: Option<(f64, Watch)> = None;
            for &i in &crossing {
                let w = watch[i];
                let ftol = match w {
                    Watch::Slip(_) => 1e-12,
                    Watch::Stick(_) => 0.0,
                };
                let tau = localize(
                    |s: f64| {
                        let xs = if s == 0.0 {
                            xa.clone()
                        } else {
                            rk4_step(&mut |tt: f64, x: &[f64]| rhs(tt, x, mode, &d, &u), t, &xa, s)?
                        };
                        Ok(watch_values(t + s, &xs, mode, &d, &[w])?[0])
                    },
                    h,
                    e0[i],
                    e1[i],
                    cfg.event_tol,
                    ftol,
                )
                .map_err(|e| match e {
                    Error::EventLocalization { reason, .. } => Error::EventLocalization { t, reason },
                    other => other,
                })?;
                if best.is_none_or(|(bt, _)| tau < bt) {
                    best = Some((tau, w));
                }
            }
            let (tau, w) = best.expect("at least one crossing");
            if tau <= cfg.event_tol {
                stalled += 1;
                if stalled > 1000 {
                    return Err(Error::EventLocalization {
                        t,
                        reason: "events accumulate without time advancing".into(),
                    });
                }
            } else {
                stalled = 0;
            }
            xa = rk4_step(&mut |tt: f64, x: &[f64]| rhs(tt, x, mode, &d, &u), t, &xa, tau)?;
            t += tau;
            if t >= b {
                t = b;
            }
            let caps = schedule.capacities(t);
            let xs: [f64; 10] = xa[..10].try_into().expect("state length");
            let slip_zero: Vec<ClutchId> = match w {
                Watch::Slip(c) if t >= stick_block[c.index()] => vec![c],
                _ => vec![],
            };
            let before = mode;
            let held = friction_flow_directed(params, &xs, &[0.0, 0.0], mode, &caps, &dirs)?
                .1
                .torque;
            if let Some(tr) = guard_check(params, friction, &xs, mode, &caps, &slip_zero)? {
                mode = tr.to;
                for (c, kind) in tr.changes {
                    let ev = match kind {
                        TransitionKind::Slip => {
                            stick_block[c.index()] = t + friction.min_dwell;
                            // torque stays continuous through break-away
                            dirs[c.index()] = -signum0(held[c.index()]);
                            EventKind::Slip
                        }
                        TransitionKind::Stick => {
                            dirs[c.index()] = 0.0;
                            EventKind::Stick
                        }
                    };
                    traj.events.push(Event {
                        t,
                        kind: ev,
                        before: ModeLabel::Friction(before),
                        after: ModeLabel::Friction(tr.to),
                        impulse: None,
                        clutch: Some(c),
                    });
                }
            }
            if let Watch::Slip(c) = w {
                if !mode.is_sticking(c) {
                    // the slip passes through zero; if reversing the torque
                    // drives it straight back the clutch slides torque-free
                    let i = c.index();
                    let mut flipped = dirs;
                    flipped[i] = -dirs[i];
                    let (xd, _) = friction_flow_directed(params, &xs, &[0.0, 0.0], mode, &caps, &flipped)?;
                    let gdot = c.relative_velocity(&[xd[6], xd[7], xd[8], xd[9]]);
                    if flipped[i] * gdot > 0.0 {
                        dirs[i] = flipped[i];
                    } else {
                        dirs[i] = 0.0;
                        disarmed_at[i] = t;
                    }
                }
            }
            let ur = inputs.value_at(t);
            let ul = if t == b { &u[..] } else { ur };
            traj.push(bsa_like_sample(
                params,
                t,
                &xa,
                ul,
                ur,
                ModeLabel::Friction(mode),
                xa[12],
            ));
            check_sticking(&xa, mode, cfg, t)?;
        }
        a = b;
    }
    Ok(traj)
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_sticking(xa: &[f64], mode: FrictionMode, cfg: &IntegratorConfig, _t: f64) -> Result<()> {
    for c in mode.sticking() {
        let g = slip_velocity(xa, c).abs();
        if g > cfg.constraint_tol {
            return Err(Error::ConstraintViolation {
                residual: g,
                tol: cfg.constraint_tol,
            });
        }
    }
    Ok(())
}

/// Illinois root bracketing of `phi` on `[0, h]` given its end values
/// `f0 ≥ 0 > f1`. Returns the post-crossing end of the final bracket once it
/// is narrower than `tol` and, if `ftol > 0`, `|phi| ≤ ftol` there.
fn localize<F>(mut phi: F, h: f64, f0: f64, f1: f64, tol: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut fa, mut b, mut fb) = (0.0, f0.max(0.0), h, f1);
    let mut side = 0i8;
    for _ in 0..400 {
        let narrow = b - a <= tol && (ftol <= 0.0 || fb.abs() <= ftol);
        if narrow || b - a <= 4.0 * f64::EPSILON * h {
            return Ok(b);
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = phi(c)?;
        if fc < 0.0 {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::EventLocalization {
        t: 0.0,
        reason: "root bracketing did not converge".into(),
    })
}

/// Replays the inputs of a collocation solution through the simulator of
/// its model.
pub fn resimulate(sol: &crate::ocp::OcpSolution, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let inputs = sol.input_schedule()?;
    let x0 = sol.initial_state();
    match sol.model {
        crate::ocp::OcpModel::Bsa => {
            let sigma = sol
                .switching_signal()
                .ok_or_else(|| Error::InvalidSchedule("solution lacks actuator modes".into()))?;
            let state = BsaState::from_vector(x0, sigma.stages[0].mode, 0.0);
            simulate_bsa(&sol.params, &state, &inputs, &sigma, cfg)
        }
        crate::ocp::OcpModel::Vsa => simulate_vsa(&sol.params, &VsaState::from_vector(x0), &inputs, sol.horizon(), cfg),
    }
}

/// Agreement between a collocation solution and its re-integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResimReport {
    /// Largest state difference over the mesh points [SI units].
    pub max_state_deviation: f64,
    pub predicted_v_tcp: f64,
    pub simulated_v_tcp: f64,
    /// `|v_sim − v_pred| / max(v_pred, 1e-12)`.
    pub relative_v_deviation: f64,
}

pub fn resimulate_check(sol: &crate::ocp::OcpSolution, cfg: &IntegratorConfig) -> Result<ResimReport> {
    let tr = resimulate(sol, cfg)?;
    let times = tr.times();
    let last_stage = sol.stages.len() - 1;
    let mut worst = 0.0f64;
    for (p, st) in sol.stages.iter().enumerate() {
        let count = if p == last_stage {
            st.states.len()
        } else {
            st.states.len() - 1
        };
        for i in 0..count {
            let t = st.mesh_times[i];
            let k = times.partition_point(|&s| s < t - 1e-9);
            if k >= times.len() || (times[k] - t).abs() > 1e-9 {
                continue;
            }
            for (a, b) in st.states[i].iter().zip(&tr.samples[k].x) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let simulated = tr.final_v_tcp()?;
    let predicted = sol.final_v_tcp;
    Ok(ResimReport {
        max_state_deviation: worst,
        predicted_v_tcp: predicted,
        simulated_v_tcp: simulated,
        relative_v_deviation: (simulated - predicted).abs() / predicted.max(1e-12),
    })
}

/// Convenience: simulate the ideal model from the hanging equilibrium.
pub fn simulate_bsa_from_rest(
    params: &PendulumParams,
    inputs: &InputSchedule,
    sigma: &SwitchingSignal,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mode: BsaMode = sigma
        .stages
        .first()
        .map(|s| s.mode)
        .ok_or_else(|| Error::InvalidSchedule("empty switching signal".into()))?;
    simulate_bsa(params, &BsaState::equilibrium(mode), inputs, sigma, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Stage;

    fn sigma(stages: &[(BsaMode, f64)]) -> SwitchingSignal {
        SwitchingSignal::new(
            stages
                .iter()
                .map(|&(mode, duration)| Stage { mode, duration })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stationary_sea_sea() {
        let p = PendulumParams::default();
        let tr = simulate_bsa_from_rest(
            &p,
            &InputSchedule::zero(2),
            &sigma(&[(BsaMode::SeaSea, 0.1)]),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.samples.iter().all(|s| s.x.iter().all(|v| *v == 0.0)));
        assert!((tr.last().unwrap().t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn switch_times_are_samples_and_impulses_logged() {
        let p = PendulumParams::default();
        let u = InputSchedule::constant(vec![2.0, -2.0]);
        let tr = simulate_bsa_from_rest(
            &p,
            &u,
            &sigma(&[(BsaMode::SeaDec, 0.0731), (BsaMode::DecSea, 0.05)]),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.samples.iter().any(|s| s.t == 0.0731));
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        let imp: Vec<_> = tr.events.iter().filter(|e| e.kind == EventKind::Impulse).collect();
        assert_eq!(imp.len(), 1);
        assert_eq!(imp[0].t, 0.0731);
        // energy balance: E(t) - E(0) = W - losses
        let s = tr.last().unwrap();
        let balance = s.energy.total() - (s.work[0] + s.work[1]) + s.dissipated;
        assert!(balance.abs() < 1e-6, "balance {balance}");
    }

    #[test]
    fn rejects_mismatched_initial_mode() {
        let p = PendulumParams::default();
        let r = simulate_bsa(
            &p,
            &BsaState::equilibrium(BsaMode::DecDec),
            &InputSchedule::zero(2),
            &sigma(&[(BsaMode::SeaSea, 0.1)]),
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn vsa_stationary_and_clamped() {
        let p = PendulumParams::default();
        let tr = simulate_vsa(
            &p,
            &VsaState::equilibrium([50.0, 50.0]),
            &InputSchedule::zero(4),
            0.1,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.samples.iter().all(|s| s.x.iter().skip(4).all(|v| *v == 0.0)));
        let tr = simulate_vsa(
            &p,
            &VsaState::equilibrium([1.0, 1.0]),
            &InputSchedule::constant(vec![0.0, 0.0, -650.0, -650.0]),
            0.1,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.samples.iter().all(|s| s.x[2] >= 0.0 && s.x[3] >= 0.0));
    }

    #[test]
    fn friction_stationary_with_held_brakes() {
        let p = PendulumParams::default();
        let sched = ClutchSchedule::constant([true, false, true, false], 1e6);
        let tr = simulate_friction(
            &p,
            &[0.0; 10],
            &InputSchedule::zero(2),
            &sched,
            &FrictionParams::default(),
            0.05,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(tr.events.is_empty());
        assert!(tr.samples.iter().all(|s| s.x.iter().all(|v| *v == 0.0)));
        assert_eq!(
            tr.samples[0].mode,
            ModeLabel::Friction(FrictionMode::from_index(6).unwrap())
        );
    }
}
