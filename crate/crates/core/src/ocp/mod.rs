//! Staged optimal control problems for the clutch-switched and the
//! variable-stiffness pendulum.

pub mod collocation;
pub mod transcription;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::tcp_velocity;
use crate::error::{Error, Result};
use crate::hybrid::{BsaMode, Stage, SwitchingSignal};
use crate::nlp::{NlpProblem, SolverInterface, SolverStatus};
use crate::params::PendulumParams;
use crate::sim::InputSchedule;
use crate::vsa::{MOTOR_VELOCITY_MAX, STIFFNESS_MAX, STIFFNESS_RATE_MAX};

pub use collocation::{collocation_points, CollocationKind, CollocationScheme};
pub use transcription::{
    BsaDynamics, Layout, LinearSystem, Objective, StageDynamics, Transcription, TranscriptionSpec, VsaDynamics,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcpModel {
    Bsa,
    Vsa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// Maximize the final end-effector speed.
    MaxVelocity,
    /// Minimize the weighted squared inputs.
    MinEffort,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    /// Actuator mode; `None` for the variable-stiffness model.
    pub mode: Option<BsaMode>,
    pub intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagedOcp {
    pub model: OcpModel,
    pub params: PendulumParams,
    pub stages: Vec<StageSpec>,
    /// Fixed final time `t_f`; `None` leaves it free.
    pub horizon: Option<f64>,
    /// Bounds on every stage duration `T_p`.
    pub duration_bounds: (f64, f64),
    pub cost: CostKind,
    /// Per-input weights of the effort cost.
    pub effort_weights: Vec<f64>,
    /// Required final end-effector speed [m/s].
    pub terminal_speed: Option<f64>,
    pub input_bounds: Vec<(f64, f64)>,
    pub state_bounds: Vec<(f64, f64)>,
    pub initial_state: Vec<f64>,
    /// Initial-state components chosen by the optimizer.
    pub free_initial: Vec<usize>,
    pub collocation: CollocationKind,
    pub degree: usize,
}

const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

impl StagedOcp {
    /// Clutch-switched pendulum starting at rest, one stage per mode, with
    /// `|u_θ| ≤ 2 rad/s` and durations in `[0.01 t_f, t_f]`.
    pub fn bsa(params: PendulumParams, modes: &[BsaMode], horizon: f64, intervals: usize) -> Self {
        let m = MOTOR_VELOCITY_MAX;
        Self {
            model: OcpModel::Bsa,
            params,
            stages: modes
                .iter()
                .map(|&mode| StageSpec {
                    mode: Some(mode),
                    intervals,
                })
                .collect(),
            horizon: Some(horizon),
            duration_bounds: (0.01 * horizon, horizon),
            cost: CostKind::MaxVelocity,
            effort_weights: vec![1.0 / (m * m); 2],
            terminal_speed: None,
            input_bounds: vec![(-m, m); 2],
            state_bounds: vec![FREE; 10],
            initial_state: vec![0.0; 10],
            free_initial: vec![],
            collocation: CollocationKind::Legendre,
            degree: 3,
        }
    }

    /// Variable-stiffness pendulum starting at rest with free initial
    /// stiffness in `[0, 100]` and `|u_k| ≤ 650`.
    pub fn vsa(params: PendulumParams, horizon: f64, intervals: usize) -> Self {
        let m = MOTOR_VELOCITY_MAX;
        let r = STIFFNESS_RATE_MAX;
        let mut state_bounds = vec![FREE; 8];
        state_bounds[2] = (0.0, STIFFNESS_MAX);
        state_bounds[3] = (0.0, STIFFNESS_MAX);
        let mut initial_state = vec![0.0; 8];
        initial_state[2] = 0.5 * STIFFNESS_MAX;
        initial_state[3] = 0.5 * STIFFNESS_MAX;
        Self {
            model: OcpModel::Vsa,
            params,
            stages: vec![StageSpec { mode: None, intervals }],
            horizon: Some(horizon),
            duration_bounds: (0.01 * horizon, horizon),
            cost: CostKind::MaxVelocity,
            effort_weights: vec![1.0 / (m * m), 1.0 / (m * m), 1.0 / (r * r), 1.0 / (r * r)],
            terminal_speed: None,
            input_bounds: vec![(-m, m), (-m, m), (-r, r), (-r, r)],
            state_bounds,
            initial_state,
            free_initial: vec![2, 3],
            collocation: CollocationKind::Legendre,
            degree: 3,
        }
    }

    /// Effort minimization with the terminal constraint `‖v_TCP(t_f)‖ = v`.
    pub fn with_terminal_speed(mut self, v: f64) -> Self {
        self.cost = CostKind::MinEffort;
        self.terminal_speed = Some(v);
        self
    }

    pub fn with_intervals(mut self, n: usize) -> Self {
        for s in &mut self.stages {
            s.intervals = n;
        }
        self
    }

    pub fn nx(&self) -> usize {
        match self.model {
            OcpModel::Bsa => crate::hybrid::STATE_DIM,
            OcpModel::Vsa => crate::vsa::STATE_DIM,
        }
    }

    pub fn nu(&self) -> usize {
        match self.model {
            OcpModel::Bsa => crate::hybrid::INPUT_DIM,
            OcpModel::Vsa => crate::vsa::INPUT_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |s: String| Err(Error::Transcription(s));
        if self.stages.is_empty() {
            return bad("problem has no stages".into());
        }
        match self.model {
            OcpModel::Bsa => {
                if self.stages.iter().any(|s| s.mode.is_none()) {
                    return bad("every clutch-switched stage needs a mode".into());
                }
                let first = self.stages[0].mode.expect("checked");
                let residual = first
                    .constraint()
                    .apply(&[
                        self.initial_state[6],
                        self.initial_state[7],
                        self.initial_state[8],
                        self.initial_state[9],
                    ])
                    .iter()
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                if residual > 1e-9 {
                    return Err(Error::ConstraintViolation { residual, tol: 1e-9 });
                }
            }
            OcpModel::Vsa => {
                if self.stages.iter().any(|s| s.mode.is_some()) {
                    return bad("variable-stiffness stages carry no actuator mode".into());
                }
            }
        }
        if self.initial_state.len() != self.nx() {
            return bad(format!("initial state must have {} entries", self.nx()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("invalid horizon {h}"));
            }
            let (lo, hi) = self.duration_bounds;
            let p = self.stages.len() as f64;
            if lo * p > h || hi * p < h {
                return bad("stage duration bounds cannot meet the horizon".into());
            }
        }
        if let Some(v) = self.terminal_speed {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("invalid terminal speed {v}"));
            }
        }
        if self.cost == CostKind::MinEffort && self.effort_weights.iter().any(|w| *w < 0.0) {
            return bad("effort weights must be nonnegative".into());
        }
        Ok(())
    }

    fn spec(&self) -> TranscriptionSpec {
        TranscriptionSpec {
            intervals: self.stages.iter().map(|s| s.intervals).collect(),
            objective: match self.cost {
                CostKind::MaxVelocity => Objective::MaxTcpSpeed,
                CostKind::MinEffort => Objective::Effort(self.effort_weights.clone()),
            },
            terminal_speed_sq: self.terminal_speed.map(|v| v * v),
            horizon: self.horizon,
            duration_bounds: vec![self.duration_bounds; self.stages.len()],
            state_bounds: self.state_bounds.clone(),
            input_bounds: self.input_bounds.clone(),
            initial_state: self.initial_state.clone(),
            free_initial: self.free_initial.clone(),
        }
    }

    fn scheme(&self) -> Result<CollocationScheme> {
        CollocationScheme::new(self.degree, self.collocation)
    }

    pub fn bsa_transcription(&self) -> Result<Transcription<BsaDynamics>> {
        self.validate()?;
        if self.model != OcpModel::Bsa {
            return Err(Error::Transcription("not a clutch-switched problem".into()));
        }
        let model = BsaDynamics {
            params: self.params,
            modes: self.stages.iter().map(|s| s.mode.expect("validated")).collect(),
        };
        Transcription::new(model, self.scheme()?, self.spec())
    }

    pub fn vsa_transcription(&self) -> Result<Transcription<VsaDynamics>> {
        self.validate()?;
        if self.model != OcpModel::Vsa {
            return Err(Error::Transcription("not a variable-stiffness problem".into()));
        }
        Transcription::new(VsaDynamics { params: self.params }, self.scheme()?, self.spec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "strategy")]
pub enum GuessStrategy {
    /// Initial state everywhere, zero inputs, equal stage durations.
    ZeroHold,
    /// Motor inputs at random bang levels per stage (remaining inputs
    /// zero), integrated by the collocation scheme itself.
    ForwardSim { seed: u64 },
}

/// Starting point of the NLP solver.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialGuess {
    pub x: Vec<f64>,
}

fn clamp_to(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.max(lo).min(hi)
}

fn fill_guess<M: StageDynamics>(t: &Transcription<M>, ocp: &StagedOcp, strategy: GuessStrategy) -> Result<Vec<f64>> {
    let lay = &t.layout;
    let (nx, nu, d) = (lay.nx, lay.nu, t.scheme.degree);
    let np = lay.stages.len();
    let mut x = vec![0.0; lay.num_vars];
    let durations: Vec<f64> = match ocp.horizon {
        Some(h) => vec![h / np as f64; np],
        None => vec![0.5 * (ocp.duration_bounds.0 + ocp.duration_bounds.1); np],
    };
    let x0: Vec<f64> = (0..nx)
        .map(|k| clamp_to(ocp.initial_state[k], ocp.state_bounds[k]))
        .collect();
    let mut rng = match strategy {
        GuessStrategy::ZeroHold => None,
        GuessStrategy::ForwardSim { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut state = x0;
    for p in 0..np {
        x[lay.stages[p].duration] = durations[p];
        let mut u = vec![0.0; nu];
        for (l, ul) in u.iter_mut().enumerate() {
            if let Some(rng) = rng.as_mut() {
                if l < 2 {
                    let (lo, hi) = ocp.input_bounds[l];
                    *ul = if rng.gen_bool(0.5) { hi } else { lo };
                }
            }
            *ul = clamp_to(*ul, ocp.input_bounds[l]);
        }
        let nint = lay.stages[p].intervals;
        let h = durations[p] / nint as f64;
        for i in 0..nint {
            let u_off = lay.input(p, i);
            x[u_off..u_off + nu].copy_from_slice(&u);
            let nodes = if rng.is_some() {
                collocation_step(&t.model, &t.scheme, p, &state, &u, h)?
            } else {
                vec![state.clone(); d + 1]
            };
            for (j, node) in nodes.iter().enumerate() {
                let s = lay.state(p, i, j);
                x[s..s + nx].copy_from_slice(node);
            }
            let mut end = vec![0.0; nx];
            for (r, node) in nodes.iter().enumerate() {
                for k in 0..nx {
                    end[k] += t.scheme.d[r] * node[k];
                }
            }
            state = end;
        }
        let s = lay.stage_end(p);
        x[s..s + nx].copy_from_slice(&state);
        if p + 1 < np {
            state = t.model.link(p, &state);
        }
    }
    Ok(x)
}

/// Solves the collocation equations of one interval by Newton's method:
/// the implicit Runge–Kutta step underlying the transcription.
pub fn collocation_step<M: StageDynamics>(
    model: &M,
    scheme: &CollocationScheme,
    stage: usize,
    x0: &[f64],
    u: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    use crate::ad::Dual;
    use nalgebra::{DMatrix, DVector};
    let nx = x0.len();
    let d = scheme.degree;
    let mut nodes = vec![x0.to_vec(); d + 1];
    let n = nx * d;
    for _ in 0..50 {
        let mut res = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, n);
        for j in 1..=d {
            let z: Vec<Dual<{ transcription::MAX_SEEDS }>> = nodes[j]
                .iter()
                .enumerate()
                .map(|(k, &v)| Dual::variable(v, k))
                .collect();
            let uu: Vec<Dual<{ transcription::MAX_SEEDS }>> = u.iter().map(|&v| Dual::constant(v)).collect();
            let f = model.flow(stage, &z, &uu);
            for k in 0..nx {
                let row = (j - 1) * nx + k;
                let mut der = 0.0;
                for r in 0..=d {
                    der += scheme.c[r][j] * nodes[r][k];
                }
                res[row] = der - h * f[k].re;
                for r in 1..=d {
                    jac[(row, (r - 1) * nx + k)] += scheme.c[r][j];
                }
                for l in 0..nx {
                    jac[(row, (j - 1) * nx + l)] -= h * f[k].eps[l];
                }
            }
        }
        let norm = res.amax();
        if norm <= 1e-13 * (1.0 + x0.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            return Ok(nodes);
        }
        let step = jac
            .lu()
            .solve(&res)
            .ok_or_else(|| Error::Transcription("singular collocation Newton system".into()))?;
        for j in 1..=d {
            for k in 0..nx {
                nodes[j][k] -= step[(j - 1) * nx + k];
            }
        }
        if step.amax() <= 1e-15 * (1.0 + norm) {
            return Ok(nodes);
        }
    }
    Ok(nodes)
}

pub fn initial_guess(ocp: &StagedOcp, strategy: GuessStrategy) -> Result<InitialGuess> {
    let x = match ocp.model {
        OcpModel::Bsa => fill_guess(&ocp.bsa_transcription()?, ocp, strategy)?,
        OcpModel::Vsa => fill_guess(&ocp.vsa_transcription()?, ocp, strategy)?,
    };
    Ok(InitialGuess { x })
}

/// Resamples a solution onto the mesh of `ocp`, e.g. to warm-start a finer
/// grid or a neighbouring horizon.
pub fn guess_from_solution(ocp: &StagedOcp, sol: &OcpSolution) -> Result<InitialGuess> {
    if sol.stages.len() != ocp.stages.len() {
        return Err(Error::Transcription("stage count differs from the solution".into()));
    }
    fn fill<M: StageDynamics>(t: &Transcription<M>, ocp: &StagedOcp, sol: &OcpSolution) -> Vec<f64> {
        let lay = &t.layout;
        let nx = lay.nx;
        let mut x = vec![0.0; lay.num_vars];
        let scale = match ocp.horizon {
            Some(h) => h / sol.horizon(),
            None => 1.0,
        };
        for (p, st) in lay.stages.iter().enumerate() {
            let src = &sol.stages[p];
            let dur = clamp_to(src.duration * scale, ocp.duration_bounds);
            x[st.duration] = dur;
            for i in 0..st.intervals {
                for j in 0..=t.scheme.degree {
                    let s = src.sample((i as f64 + t.scheme.nodes[j]) / st.intervals as f64);
                    let off = lay.state(p, i, j);
                    x[off..off + nx].copy_from_slice(&s);
                }
                let u = src.input_at((i as f64 + 0.5) / st.intervals as f64);
                let off = lay.input(p, i);
                for (l, v) in u.iter().enumerate() {
                    x[off + l] = clamp_to(*v, ocp.input_bounds[l]);
                }
            }
            let off = lay.stage_end(p);
            x[off..off + nx].copy_from_slice(src.states.last().expect("nonempty stage"));
        }
        for k in 0..nx {
            if !ocp.free_initial.contains(&k) {
                x[k] = ocp.initial_state[k];
            }
        }
        x
    }
    let x = match ocp.model {
        OcpModel::Bsa => fill(&ocp.bsa_transcription()?, ocp, sol),
        OcpModel::Vsa => fill(&ocp.vsa_transcription()?, ocp, sol),
    };
    Ok(InitialGuess { x })
}

/// One stage of a solved problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub mode: Option<BsaMode>,
    pub t_start: f64,
    pub duration: f64,
    /// Interval boundaries, `N + 1` times.
    pub mesh_times: Vec<f64>,
    /// States at the interval boundaries.
    pub states: Vec<Vec<f64>>,
    /// States at the collocation points, `N × d`.
    pub collocation_states: Vec<Vec<Vec<f64>>>,
    /// Piecewise-constant inputs, one per interval.
    pub inputs: Vec<Vec<f64>>,
    /// Normalized interpolation nodes `{0, τ_1, …, τ_d}`.
    pub nodes: Vec<f64>,
}

impl StageSolution {
    fn interval_at(&self, s: f64) -> (usize, f64) {
        let n = self.inputs.len();
        let pos = (s.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        (i, pos - i as f64)
    }

    /// Interpolated state at normalized stage time `s ∈ [0, 1]`.
    pub fn sample(&self, s: f64) -> Vec<f64> {
        let (i, tau) = self.interval_at(s);
        let nx = self.states[0].len();
        let d = self.nodes.len() - 1;
        (0..nx)
            .map(|k| {
                let vals: Vec<f64> = (0..=d)
                    .map(|j| {
                        if j == 0 {
                            self.states[i][k]
                        } else {
                            self.collocation_states[i][j - 1][k]
                        }
                    })
                    .collect();
                lagrange(&self.nodes, &vals, tau)
            })
            .collect()
    }

    pub fn input_at(&self, s: f64) -> &[f64] {
        &self.inputs[self.interval_at(s).0]
    }

    /// Boundary and collocation-point times with their states, in order.
    pub fn dense_states(&self) -> Vec<(f64, Vec<f64>)> {
        let n = self.inputs.len();
        let h = self.duration / n as f64;
        let mut out = Vec::new();
        for i in 0..n {
            out.push((self.mesh_times[i], self.states[i].clone()));
            for (j, xs) in self.collocation_states[i].iter().enumerate() {
                out.push((self.mesh_times[i] + h * self.nodes[j + 1], xs.clone()));
            }
        }
        out.push((self.mesh_times[n], self.states[n].clone()));
        out
    }
}

fn lagrange(nodes: &[f64], vals: &[f64], tau: f64) -> f64 {
    let mut s = 0.0;
    for r in 0..nodes.len() {
        let mut l = 1.0;
        for q in 0..nodes.len() {
            if q != r {
                l *= (tau - nodes[q]) / (nodes[r] - nodes[q]);
            }
        }
        s += l * vals[r];
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcpSolution {
    pub model: OcpModel,
    pub params: PendulumParams,
    pub status: SolverStatus,
    pub cost: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub durations: Vec<f64>,
    pub final_v_tcp: f64,
    pub stages: Vec<StageSolution>,
}

impl OcpSolution {
    pub fn horizon(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.stages[0].states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.stages
            .last()
            .and_then(|s| s.states.last())
            .expect("nonempty solution")
    }

    /// Absolute times at which a stage ends and the next begins.
    pub fn switch_times(&self) -> Vec<f64> {
        self.stages.iter().skip(1).map(|s| s.t_start).collect()
    }

    /// The optimal inputs as a zero-order-hold signal.
    pub fn input_schedule(&self) -> Result<InputSchedule> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for st in &self.stages {
            for (i, u) in st.inputs.iter().enumerate() {
                times.push(st.mesh_times[i]);
                values.push(u.clone());
            }
        }
        InputSchedule::new(times, values)
    }

    /// Switching signal of a clutch-switched solution.
    pub fn switching_signal(&self) -> Option<SwitchingSignal> {
        let stages = self
            .stages
            .iter()
            .map(|s| {
                s.mode.map(|mode| Stage {
                    mode,
                    duration: s.duration,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        SwitchingSignal::new(stages).ok()
    }

    /// All boundary and collocation-point states in time order.
    pub fn dense_states(&self) -> Vec<(f64, Vec<f64>)> {
        self.stages.iter().flat_map(|s| s.dense_states()).collect()
    }
}

fn extract<M: StageDynamics>(t: &Transcription<M>, ocp: &StagedOcp, x: &[f64]) -> (Vec<f64>, Vec<StageSolution>) {
    let lay = &t.layout;
    let (nx, nu, d) = (lay.nx, lay.nu, t.scheme.degree);
    let mut t0 = 0.0;
    let mut durations = Vec::new();
    let mut stages = Vec::new();
    for (p, st) in lay.stages.iter().enumerate() {
        let dur = x[st.duration];
        let h = dur / st.intervals as f64;
        let mut states = Vec::new();
        let mut colloc = Vec::new();
        let mut inputs = Vec::new();
        for i in 0..st.intervals {
            let s = lay.state(p, i, 0);
            states.push(x[s..s + nx].to_vec());
            colloc.push(
                (1..=d)
                    .map(|j| {
                        let s = lay.state(p, i, j);
                        x[s..s + nx].to_vec()
                    })
                    .collect(),
            );
            let u = lay.input(p, i);
            inputs.push(x[u..u + nu].to_vec());
        }
        let s = lay.stage_end(p);
        states.push(x[s..s + nx].to_vec());
        stages.push(StageSolution {
            mode: ocp.stages[p].mode,
            t_start: t0,
            duration: dur,
            mesh_times: (0..=st.intervals).map(|i| t0 + i as f64 * h).collect(),
            states,
            collocation_states: colloc,
            inputs,
            nodes: t.scheme.nodes.clone(),
        });
        durations.push(dur);
        t0 += dur;
    }
    (durations, stages)
}

fn run<M: StageDynamics>(
    t: &Transcription<M>,
    ocp: &StagedOcp,
    solver: &dyn SolverInterface,
    init: &InitialGuess,
) -> Result<OcpSolution> {
    if init.x.len() != t.num_vars() {
        return Err(Error::Transcription(format!(
            "initial guess has {} entries, transcription has {}",
            init.x.len(),
            t.num_vars()
        )));
    }
    let res = solver.solve(t, &init.x)?;
    let (durations, stages) = extract(t, ocp, &res.x);
    let xf = stages.last().and_then(|s| s.states.last()).expect("nonempty");
    let (qi, qdi) = match ocp.model {
        OcpModel::Bsa => ([4, 5], [8, 9]),
        OcpModel::Vsa => ([4, 5], [6, 7]),
    };
    let final_v_tcp = tcp_velocity(&[xf[qi[0]], xf[qi[1]]], &[xf[qdi[0]], xf[qdi[1]]], &ocp.params).1;
    Ok(OcpSolution {
        model: ocp.model,
        params: ocp.params,
        status: res.status,
        cost: res.objective,
        iterations: res.iterations,
        primal_infeasibility: res.primal_infeasibility,
        dual_infeasibility: res.dual_infeasibility,
        durations,
        final_v_tcp,
        stages,
    })
}

/// Transcribes `ocp` and solves it from `init`. A solver that stops
/// without converging still yields a solution with its status set.
pub fn solve(ocp: &StagedOcp, solver: &dyn SolverInterface, init: &InitialGuess) -> Result<OcpSolution> {
    match ocp.model {
        OcpModel::Bsa => run(&ocp.bsa_transcription()?, ocp, solver, init),
        OcpModel::Vsa => run(&ocp.vsa_transcription()?, ocp, solver, init),
    }
}

/// Number of collocation intervals used by the default experiment setups.
pub const DEFAULT_INTERVALS: usize = 20;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::InteriorPoint;

    #[test]
    fn zero_hold_guess_is_equilibrium() {
        let ocp = StagedOcp::bsa(PendulumParams::default(), &[BsaMode::SeaDec, BsaMode::DecSea], 0.2, 4);
        let g = initial_guess(&ocp, GuessStrategy::ZeroHold).unwrap();
        let t = ocp.bsa_transcription().unwrap();
        for st in &t.layout.stages {
            assert!((g.x[st.duration] - 0.1).abs() < 1e-15);
        }
        let sum: f64 =
            g.x.iter()
                .enumerate()
                .filter(|(k, _)| !t.layout.stages.iter().any(|s| s.duration == *k))
                .map(|(_, v)| v.abs())
                .sum();
        assert_eq!(sum, 0.0);
    }

    #[test]
    fn forward_sim_guess_satisfies_defects() {
        let ocp = StagedOcp::bsa(PendulumParams::default(), &[BsaMode::SeaDec, BsaMode::DecSea], 0.2, 6);
        let g = initial_guess(&ocp, GuessStrategy::ForwardSim { seed: 4 }).unwrap();
        let t = ocp.bsa_transcription().unwrap();
        let mut c = vec![0.0; t.num_constraints()];
        t.constraints(&g.x, &mut c);
        let worst = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-10, "defect residual {worst}");
        let again = initial_guess(&ocp, GuessStrategy::ForwardSim { seed: 4 }).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn rejects_inconsistent_problems() {
        let mut ocp = StagedOcp::bsa(PendulumParams::default(), &[BsaMode::SeaDec], 0.2, 4);
        ocp.initial_state[6] = 1.0;
        assert!(ocp.bsa_transcription().is_err());
        let mut ocp = StagedOcp::bsa(PendulumParams::default(), &[BsaMode::SeaDec], 0.2, 4);
        ocp.stages[0].mode = None;
        assert!(ocp.validate().is_err());
        let ocp = StagedOcp::vsa(PendulumParams::default(), 0.2, 4);
        assert!(ocp.bsa_transcription().is_err());
    }

    #[test]
    fn rest_is_optimal_with_zero_effort() {
        let mut ocp = StagedOcp::bsa(PendulumParams::default(), &[BsaMode::SeaSea], 0.1, 3);
        ocp.cost = CostKind::MinEffort;
        let g = initial_guess(&ocp, GuessStrategy::ZeroHold).unwrap();
        let sol = solve(&ocp, &InteriorPoint::default(), &g).unwrap();
        assert!(sol.status.is_success(), "{:?}", sol.status);
        assert!(sol.cost.abs() < 1e-8);
        assert!(sol.final_v_tcp < 1e-6);
    }
}
