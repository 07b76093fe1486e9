//! The three simulation studies: maximal launch speed, minimal effort for a
//! prescribed speed over a range of horizons, and the replay of the launch
//! through the friction-clutch model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friction::{ClutchSchedule, FrictionParams};
use crate::hybrid::BsaMode;
use crate::nlp::{SolverInterface, SolverOptions};
use crate::ocp::{
    guess_from_solution, initial_guess, solve, CollocationKind, CostKind, GuessStrategy, InitialGuess, OcpModel,
    OcpSolution, StagedOcp, DEFAULT_INTERVALS,
};
use crate::params::PendulumParams;
use crate::sim::{resimulate, simulate_friction, IntegratorConfig, Trajectory};
use crate::vsa::{MOTOR_VELOCITY_MAX, STIFFNESS_MAX, STIFFNESS_RATE_MAX};

pub const SIM1_HORIZON: f64 = 0.2;
pub const SIM1_MODES: [BsaMode; 2] = [BsaMode::SeaDec, BsaMode::DecSea];
/// Prescribed final end-effector speed of the effort study [m/s].
pub const SIM2_SPEED: f64 = 3.0;

/// `t_f ∈ {0.2, 0.3, …, 1.0}` s.
pub fn sim2_horizons() -> Vec<f64> {
    (2..=10).map(|k| k as f64 / 10.0).collect()
}

/// Actuator limits of the optimal control problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    /// `|u_θ|` [rad/s].
    pub motor_velocity: f64,
    /// `|u_k|` [N·m/(rad·s)].
    pub stiffness_rate: f64,
    /// Admissible stiffness interval [N·m/rad].
    pub stiffness: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            motor_velocity: MOTOR_VELOCITY_MAX,
            stiffness_rate: STIFFNESS_RATE_MAX,
            stiffness: (0.0, STIFFNESS_MAX),
        }
    }
}

/// Model, limits and numerical settings shared by the studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub params: PendulumParams,
    /// Mode sequence of the clutch-switched model.
    pub modes: Vec<BsaMode>,
    pub bounds: Bounds,
    pub intervals: usize,
    pub collocation: CollocationKind,
    pub degree: usize,
    /// Seeds of the forward-simulated starting points.
    pub seeds: Vec<u64>,
    pub solver: SolverOptions,
    pub integrator: IntegratorConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            params: PendulumParams::default(),
            modes: SIM1_MODES.to_vec(),
            bounds: Bounds::default(),
            intervals: DEFAULT_INTERVALS,
            collocation: CollocationKind::Legendre,
            degree: 3,
            seeds: (1..=8).collect(),
            solver: SolverOptions::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

fn base_problem(model: OcpModel, horizon: f64, s: &Settings) -> StagedOcp {
    let b = &s.bounds;
    let mut ocp = match model {
        OcpModel::Bsa => StagedOcp::bsa(s.params, &s.modes, horizon, s.intervals),
        OcpModel::Vsa => {
            let mut o = StagedOcp::vsa(s.params, horizon, s.intervals);
            let (k_lo, k_hi) = b.stiffness;
            o.state_bounds[2] = (k_lo, k_hi);
            o.state_bounds[3] = (k_lo, k_hi);
            let k0 = 0.5 * (k_lo + k_hi);
            o.initial_state[2] = k0;
            o.initial_state[3] = k0;
            let r = b.stiffness_rate;
            o.input_bounds[2] = (-r, r);
            o.input_bounds[3] = (-r, r);
            o.effort_weights[2] = 1.0 / (r * r);
            o.effort_weights[3] = 1.0 / (r * r);
            o
        }
    };
    let m = b.motor_velocity;
    for i in 0..2 {
        ocp.input_bounds[i] = (-m, m);
        ocp.effort_weights[i] = 1.0 / (m * m);
    }
    ocp.collocation = s.collocation;
    ocp.degree = s.degree;
    ocp
}

/// Maximal final end-effector speed within `horizon`.
pub fn sim1_problem(model: OcpModel, horizon: f64, s: &Settings) -> StagedOcp {
    base_problem(model, horizon, s)
}

/// Minimal effort reaching `‖v_TCP(t_f)‖ = speed`.
pub fn sim2_problem(model: OcpModel, horizon: f64, speed: f64, s: &Settings) -> StagedOcp {
    base_problem(model, horizon, s).with_terminal_speed(speed)
}

/// Solves from every guess (in parallel) and keeps the converged solution
/// of least cost; without any converged run, the least infeasible one.
pub fn solve_multistart(
    ocp: &StagedOcp,
    solver: &dyn SolverInterface,
    guesses: &[InitialGuess],
) -> Result<OcpSolution> {
    if guesses.is_empty() {
        return Err(Error::Transcription("multistart needs at least one guess".into()));
    }
    let runs: Vec<Result<OcpSolution>> = guesses.par_iter().map(|g| solve(ocp, solver, g)).collect();
    let mut best: Option<OcpSolution> = None;
    let mut first_err = None;
    for r in runs {
        let sol = match r {
            Ok(s) => s,
            Err(e) => {
                first_err.get_or_insert(e);
                continue;
            }
        };
        let better = match &best {
            None => true,
            Some(b) => match (sol.status.is_success(), b.status.is_success()) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => sol.cost < b.cost - 1e-9 * b.cost.abs().max(1.0),
                (false, false) => sol.primal_infeasibility < b.primal_infeasibility,
            },
        };
        if better {
            best = Some(sol);
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("nonempty guesses"),
    }
}

fn seeded_guesses(ocp: &StagedOcp, seeds: &[u64]) -> Result<Vec<InitialGuess>> {
    seeds
        .iter()
        .map(|&seed| initial_guess(ocp, GuessStrategy::ForwardSim { seed }))
        .collect()
}

pub fn solve_sim1(model: OcpModel, horizon: f64, s: &Settings, solver: &dyn SolverInterface) -> Result<OcpSolution> {
    let ocp = sim1_problem(model, horizon, s);
    solve_multistart(&ocp, solver, &seeded_guesses(&ocp, &s.seeds)?)
}

/// Effort study at one horizon. Besides the seeded guesses the solver is
/// started from the fastest launch of the same horizon, which already
/// exceeds the prescribed speed, and from `warm` if given.
pub fn solve_sim2(
    model: OcpModel,
    horizon: f64,
    speed: f64,
    s: &Settings,
    solver: &dyn SolverInterface,
    warm: Option<&OcpSolution>,
) -> Result<OcpSolution> {
    let ocp = sim2_problem(model, horizon, speed, s);
    let mut launch = ocp.clone();
    launch.cost = CostKind::MaxVelocity;
    launch.terminal_speed = None;
    let fastest = solve_multistart(&launch, solver, &seeded_guesses(&launch, &s.seeds)?)?;
    let mut guesses = seeded_guesses(&ocp, &s.seeds)?;
    if fastest.status.is_success() {
        guesses.push(guess_from_solution(&ocp, &fastest)?);
    }
    if let Some(w) = warm {
        guesses.push(guess_from_solution(&ocp, w)?);
    }
    solve_multistart(&ocp, solver, &guesses)
}

/// Clutch parameters of the friction replay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sim3Config {
    /// Torque capacity of an engaged clutch [N·m].
    pub m_max: f64,
    pub t_connect: f64,
    pub t_separate: f64,
    /// Clutch commands are issued this much before the ideal switch [s].
    pub advance: f64,
    pub friction: FrictionParams,
}

impl Default for Sim3Config {
    fn default() -> Self {
        Self {
            m_max: 30.0,
            t_connect: 0.02,
            t_separate: 0.02,
            advance: 0.01,
            friction: FrictionParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sim3Outcome {
    pub ideal: Trajectory,
    pub friction: Trajectory,
    /// Times at which the clutch commands are issued.
    pub command_times: Vec<f64>,
    pub ideal_v_tcp: f64,
    pub friction_v_tcp: f64,
    pub velocity_ratio: f64,
    /// Largest potential energy of spring 2 [J].
    pub ideal_peak_spring2: f64,
    pub friction_peak_spring2: f64,
}

/// Clutch commands of the friction replay: at each ideal switching time,
/// advanced by `cfg.advance`, the clutches are commanded to the next mode.
pub fn sim3_schedule(sol: &OcpSolution, cfg: &Sim3Config) -> Result<ClutchSchedule> {
    let modes: Vec<BsaMode> = sol
        .stages
        .iter()
        .map(|s| {
            s.mode
                .ok_or_else(|| Error::Transcription("friction replay needs a clutch-switched solution".into()))
        })
        .collect::<Result<_>>()?;
    let command_times: Vec<f64> = sol.switch_times().iter().map(|t| t - cfg.advance).collect();
    ClutchSchedule::from_mode_sequence(&modes, &command_times, cfg.m_max, cfg.t_connect, cfg.t_separate)
}

/// Replays a clutch-switched solution through the ideal and the friction
/// clutch models, with `schedule` overriding the derived clutch commands.
pub fn run_sim3(
    sol: &OcpSolution,
    cfg: &Sim3Config,
    schedule: Option<&ClutchSchedule>,
    integrator: &IntegratorConfig,
) -> Result<Sim3Outcome> {
    if sol.model != OcpModel::Bsa {
        return Err(Error::Transcription(
            "friction replay needs a clutch-switched solution".into(),
        ));
    }
    let ideal = resimulate(sol, integrator)?;
    let schedule = match schedule {
        Some(s) => s.clone(),
        None => sim3_schedule(sol, cfg)?,
    };
    let mut command_times: Vec<f64> = schedule
        .clutches
        .iter()
        .flat_map(|c| c.commands.iter().map(|(t, _)| *t))
        .collect();
    command_times.sort_by(f64::total_cmp);
    command_times.dedup();
    let x0: [f64; 10] = sol
        .initial_state()
        .try_into()
        .map_err(|_| Error::Transcription("clutch-switched state must have 10 entries".into()))?;
    let friction = simulate_friction(
        &sol.params,
        &x0,
        &sol.input_schedule()?,
        &schedule,
        &cfg.friction,
        sol.horizon(),
        integrator,
    )?;
    let ideal_v_tcp = ideal.final_v_tcp()?;
    let friction_v_tcp = friction.final_v_tcp()?;
    let peak = |t: &Trajectory| {
        t.samples
            .iter()
            .map(|s| s.energy.potential_spring[1])
            .fold(0.0f64, f64::max)
    };
    Ok(Sim3Outcome {
        ideal_peak_spring2: peak(&ideal),
        friction_peak_spring2: peak(&friction),
        velocity_ratio: friction_v_tcp / ideal_v_tcp.max(1e-12),
        ideal,
        friction,
        command_times,
        ideal_v_tcp,
        friction_v_tcp,
    })
}

/// Time of the largest total potential energy as a fraction of the
/// trajectory duration.
pub fn potential_peak_fraction(tr: &Trajectory) -> Result<f64> {
    let i = tr.argmax_by(|s| s.energy.potential()).ok_or(Error::EmptyTrajectory)?;
    let t_end = tr.last()?.t;
    Ok(tr.samples[i].t / t_end)
}

/// Completed build-up and release cycles of the total potential energy:
/// maxima followed by a drop of at least `prominence` times the overall
/// potential range.
pub fn exchange_cycles(tr: &Trajectory, prominence: f64) -> usize {
    let ep: Vec<f64> = tr.samples.iter().map(|s| s.energy.potential()).collect();
    let (lo, hi) = ep
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let thr = prominence * (hi - lo);
    if !(thr > 0.0) {
        return 0;
    }
    let mut rising = true;
    let mut run_max = f64::NEG_INFINITY;
    let mut run_min = f64::INFINITY;
    let mut cycles = 0;
    for &v in &ep {
        if rising {
            run_max = run_max.max(v);
            if v < run_max - thr {
                cycles += 1;
                rising = false;
                run_min = v;
            }
        } else {
            run_min = run_min.min(v);
            if v > run_min + thr {
                rising = true;
                run_max = v;
            }
        }
    }
    cycles
}

/// Largest `|P_in|` of `joint` strictly after time `t`, including left
/// limits.
pub fn max_input_power_after(tr: &Trajectory, joint: usize, t: f64) -> f64 {
    tr.samples
        .iter()
        .filter(|s| s.t > t)
        .map(|s| s.power.p_in[joint].abs().max(s.power_left.p_in[joint].abs()))
        .fold(0.0, f64::max)
}
