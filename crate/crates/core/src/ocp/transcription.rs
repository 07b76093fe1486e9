//! Direct collocation of multi-stage optimal control problems.
//!
//! Every stage is mapped to normalized time and split into `N` intervals of
//! length `h = T/N`. Per interval the decision vector holds the state at the
//! interval start, one piecewise-constant input and the states at the `d`
//! collocation points; the stage end state follows the last interval and the
//! durations `T_p` come last.

use crate::ad::{Dual, Dual2, Scalar};
use crate::dynamics::tcp_speed_sq;
use crate::error::{Error, Result};
use crate::hybrid::{flow_unchecked, jump_unchecked, BsaMode};
use crate::nlp::NlpProblem;
use crate::params::PendulumParams;
use crate::vsa::vsa_flow_vector;

use super::collocation::CollocationScheme;

/// Seeds available to the automatic differentiation of one flow call.
pub const MAX_SEEDS: usize = 12;

type D1 = Dual<MAX_SEEDS>;
type D2 = Dual2<MAX_SEEDS>;

/// Dynamics of the stages of a staged problem.
pub trait StageDynamics {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn flow<S: Scalar>(&self, stage: usize, x: &[S], u: &[S]) -> Vec<S>;
    /// Whether entering `stage + 1` applies a nonlinear map to the state.
    fn has_jump(&self, _stage: usize) -> bool {
        false
    }
    /// Initial state of `stage + 1` from the final state of `stage`.
    fn link<S: Scalar>(&self, _stage: usize, x: &[S]) -> Vec<S> {
        x.to_vec()
    }
    /// State indices of `(q1, q2, q̇1, q̇2)` and the pendulum parameters, for
    /// problems with an end-effector speed.
    fn tcp(&self) -> Option<([usize; 4], PendulumParams)> {
        None
    }
}

/// Clutch-switched pendulum with one actuator mode per stage.
#[derive(Clone, Debug)]
pub struct BsaDynamics {
    pub params: PendulumParams,
    pub modes: Vec<BsaMode>,
}

impl StageDynamics for BsaDynamics {
    fn nx(&self) -> usize {
        crate::hybrid::STATE_DIM
    }
    fn nu(&self) -> usize {
        crate::hybrid::INPUT_DIM
    }
    fn flow<S: Scalar>(&self, stage: usize, x: &[S], u: &[S]) -> Vec<S> {
        flow_unchecked(&self.params, self.modes[stage], x, u).to_vec()
    }
    fn has_jump(&self, stage: usize) -> bool {
        self.modes.get(stage + 1).is_some_and(|&m| m != self.modes[stage])
    }
    fn link<S: Scalar>(&self, stage: usize, x: &[S]) -> Vec<S> {
        if self.has_jump(stage) {
            jump_unchecked(&self.params, x, self.modes[stage + 1]).to_vec()
        } else {
            x.to_vec()
        }
    }
    fn tcp(&self) -> Option<([usize; 4], PendulumParams)> {
        Some(([4, 5, 8, 9], self.params))
    }
}

#[derive(Clone, Debug)]
pub struct VsaDynamics {
    pub params: PendulumParams,
}

impl StageDynamics for VsaDynamics {
    fn nx(&self) -> usize {
        crate::vsa::STATE_DIM
    }
    fn nu(&self) -> usize {
        crate::vsa::INPUT_DIM
    }
    fn flow<S: Scalar>(&self, _stage: usize, x: &[S], u: &[S]) -> Vec<S> {
        vsa_flow_vector(&self.params, x, u).to_vec()
    }
    fn tcp(&self) -> Option<([usize; 4], PendulumParams)> {
        Some(([4, 5, 6, 7], self.params))
    }
}

/// `ẋ = A x + B u`, a test system with a closed-form solution.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl StageDynamics for LinearSystem {
    fn nx(&self) -> usize {
        self.a.len()
    }
    fn nu(&self) -> usize {
        self.b.first().map_or(0, |r| r.len())
    }
    fn flow<S: Scalar>(&self, _stage: usize, x: &[S], u: &[S]) -> Vec<S> {
        (0..self.nx())
            .map(|i| {
                let mut s = S::zero();
                for (j, &a) in self.a[i].iter().enumerate() {
                    s += x[j] * a;
                }
                if let Some(row) = self.b.get(i) {
                    for (j, &b) in row.iter().enumerate() {
                        s += u[j] * b;
                    }
                }
                s
            })
            .collect()
    }
}

/// Objective of the transcribed problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// Pure feasibility problem.
    Zero,
    /// `−‖v_TCP(t_f)‖²`.
    MaxTcpSpeed,
    /// `Σ_p Σ_i h_p Σ_l w_l u_il²`, the exact integral of the weighted
    /// squared piecewise-constant input.
    Effort(Vec<f64>),
}

/// Index bookkeeping of the decision vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub nx: usize,
    pub nu: usize,
    pub degree: usize,
    pub stages: Vec<StageLayout>,
    pub num_vars: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageLayout {
    pub intervals: usize,
    pub offset: usize,
    pub duration: usize,
    pub row_offset: usize,
}

impl Layout {
    pub fn new(nx: usize, nu: usize, degree: usize, intervals: &[usize]) -> Self {
        let block = nx * (degree + 1) + nu;
        let mut stages = Vec::with_capacity(intervals.len());
        let mut off = 0;
        let mut row = 0;
        for (p, &n) in intervals.iter().enumerate() {
            stages.push(StageLayout {
                intervals: n,
                offset: off,
                duration: 0,
                row_offset: row,
            });
            off += n * block + nx;
            row += n * (degree + 1) * nx;
            if p + 1 < intervals.len() {
                row += nx;
            }
        }
        for (p, st) in stages.iter_mut().enumerate() {
            st.duration = off + p;
        }
        Self {
            nx,
            nu,
            degree,
            stages,
            num_vars: off + intervals.len(),
        }
    }

    fn block(&self) -> usize {
        self.nx * (self.degree + 1) + self.nu
    }

    /// First index of the state at node `j` of interval `i`; `(N, 0)` is
    /// the stage end.
    pub fn state(&self, p: usize, i: usize, j: usize) -> usize {
        let st = &self.stages[p];
        let base = st.offset + i * self.block();
        if j == 0 {
            base
        } else {
            base + self.nx + self.nu + (j - 1) * self.nx
        }
    }

    pub fn input(&self, p: usize, i: usize) -> usize {
        self.stages[p].offset + i * self.block() + self.nx
    }

    pub fn stage_end(&self, p: usize) -> usize {
        self.state(p, self.stages[p].intervals, 0)
    }

    pub fn final_state(&self) -> usize {
        self.stage_end(self.stages.len() - 1)
    }

    /// Row of the first defect at collocation point `j ≥ 1` of interval `i`.
    fn defect_row(&self, p: usize, i: usize, j: usize) -> usize {
        self.stages[p].row_offset + i * (self.degree + 1) * self.nx + (j - 1) * self.nx
    }

    fn continuity_row(&self, p: usize, i: usize) -> usize {
        self.stages[p].row_offset + i * (self.degree + 1) * self.nx + self.degree * self.nx
    }

    fn link_row(&self, p: usize) -> usize {
        self.stages[p].row_offset + self.stages[p].intervals * (self.degree + 1) * self.nx
    }

    fn dynamics_rows(&self) -> usize {
        let last = self.stages.last().expect("at least one stage");
        last.row_offset + last.intervals * (self.degree + 1) * self.nx
    }
}

/// Bounds and extra constraints of a transcription.
#[derive(Clone, Debug)]
pub struct TranscriptionSpec {
    pub intervals: Vec<usize>,
    pub objective: Objective,
    /// Required `‖v_TCP(t_f)‖²`.
    pub terminal_speed_sq: Option<f64>,
    /// Fixed total duration, enforced as `Σ T_p = t_f` over several stages
    /// or through the bounds of a single stage.
    pub horizon: Option<f64>,
    pub duration_bounds: Vec<(f64, f64)>,
    pub state_bounds: Vec<(f64, f64)>,
    pub input_bounds: Vec<(f64, f64)>,
    pub initial_state: Vec<f64>,
    /// Initial-state components left to the optimizer.
    pub free_initial: Vec<usize>,
}

/// The NLP obtained from a staged problem.
pub struct Transcription<M: StageDynamics> {
    pub model: M,
    pub scheme: CollocationScheme,
    pub layout: Layout,
    pub spec: TranscriptionSpec,
    lo: Vec<f64>,
    hi: Vec<f64>,
    terminal_row: Option<usize>,
    horizon_row: Option<usize>,
    num_rows: usize,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

fn lower(a: usize, b: usize) -> (usize, usize) {
    if a >= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<M: StageDynamics> Transcription<M> {
    pub fn new(model: M, scheme: CollocationScheme, spec: TranscriptionSpec) -> Result<Self> {
        let (nx, nu) = (model.nx(), model.nu());
        let np = spec.intervals.len();
        let bad = |s: String| Err(Error::Transcription(s));
        if np == 0 {
            return bad("problem has no stages".into());
        }
        if nx + nu > MAX_SEEDS {
            return bad(format!("{} states and inputs exceed {MAX_SEEDS} seeds", nx + nu));
        }
        if spec.intervals.contains(&0) {
            return bad("every stage needs at least one interval".into());
        }
        if spec.duration_bounds.len() != np {
            return bad("one duration bound per stage required".into());
        }
        if spec.state_bounds.len() != nx || spec.initial_state.len() != nx {
            return bad("state bounds or initial state have wrong dimension".into());
        }
        if spec.input_bounds.len() != nu {
            return bad("input bounds have wrong dimension".into());
        }
        if let Objective::Effort(w) = &spec.objective {
            if w.len() != nu {
                return bad("one effort weight per input required".into());
            }
        }
        if (spec.terminal_speed_sq.is_some() || spec.objective == Objective::MaxTcpSpeed) && model.tcp().is_none() {
            return bad("model has no end-effector speed".into());
        }
        let all_bounds = spec
            .state_bounds
            .iter()
            .chain(&spec.input_bounds)
            .chain(&spec.duration_bounds);
        for &(l, u) in all_bounds {
            if l.is_nan() || u.is_nan() || l > u {
                return bad(format!("inconsistent bounds [{l}, {u}]"));
            }
        }
        if spec.duration_bounds.iter().any(|&(l, _)| l <= 0.0) {
            return bad("stage durations must be bounded away from zero".into());
        }
        if let Some(&i) = spec.free_initial.iter().find(|&&i| i >= nx) {
            return bad(format!("free initial component {i} out of range"));
        }

        let layout = Layout::new(nx, nu, scheme.degree, &spec.intervals);
        let n = layout.num_vars;
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for p in 0..np {
            let nint = layout.stages[p].intervals;
            for i in 0..=nint {
                let nodes = if i == nint { 1 } else { scheme.degree + 1 };
                for j in 0..nodes {
                    let s = layout.state(p, i, j);
                    for k in 0..nx {
                        (lo[s + k], hi[s + k]) = spec.state_bounds[k];
                    }
                }
                if i < nint {
                    let u = layout.input(p, i);
                    for l in 0..nu {
                        (lo[u + l], hi[u + l]) = spec.input_bounds[l];
                    }
                }
            }
            let t = layout.stages[p].duration;
            (lo[t], hi[t]) = spec.duration_bounds[p];
            if np == 1 {
                if let Some(h) = spec.horizon {
                    lo[t] = h;
                    hi[t] = h;
                }
            }
        }
        for k in 0..nx {
            if !spec.free_initial.contains(&k) {
                lo[k] = spec.initial_state[k];
                hi[k] = spec.initial_state[k];
            }
        }

        let mut rows = layout.dynamics_rows();
        let terminal_row = spec.terminal_speed_sq.map(|_| {
            rows += 1;
            rows - 1
        });
        let horizon_row = (np > 1 && spec.horizon.is_some()).then(|| {
            rows += 1;
            rows - 1
        });
        let mut t = Self {
            model,
            scheme,
            layout,
            spec,
            lo,
            hi,
            terminal_row,
            horizon_row,
            num_rows: rows,
            jac: Vec::new(),
            hess: Vec::new(),
        };
        t.jac = t.build_jacobian_structure();
        t.hess = t.build_hessian_structure();
        Ok(t)
    }

    /// Number of stage links that apply a nonlinear jump map.
    pub fn jump_links(&self) -> usize {
        (0..self.layout.stages.len().saturating_sub(1))
            .filter(|&p| self.model.has_jump(p))
            .count()
    }

    fn h(&self, x: &[f64], p: usize) -> f64 {
        x[self.layout.stages[p].duration] / self.layout.stages[p].intervals as f64
    }

    /// Visits each collocation point as `(p, i, j)`.
    fn for_each_point(&self, mut f: impl FnMut(usize, usize, usize)) {
        for (p, st) in self.layout.stages.iter().enumerate() {
            for i in 0..st.intervals {
                for j in 1..=self.scheme.degree {
                    f(p, i, j);
                }
            }
        }
    }

    fn terminal_speed<S: Scalar>(&self, x: &[S]) -> Option<S> {
        let (idx, params) = self.model.tcp()?;
        let f = self.layout.final_state();
        Some(tcp_speed_sq(
            &[x[f + idx[0]], x[f + idx[1]]],
            &[x[f + idx[2]], x[f + idx[3]]],
            &params,
        ))
    }

    /// Gradient and Hessian of `‖v_TCP(t_f)‖²` over its four arguments.
    fn terminal_speed_d2(&self, x: &[f64]) -> Option<([usize; 4], Dual2<4>)> {
        let (idx, params) = self.model.tcp()?;
        let f = self.layout.final_state();
        let z: Vec<Dual2<4>> = (0..4).map(|k| Dual2::variable(x[f + idx[k]], k)).collect();
        let v = tcp_speed_sq(&[z[0], z[1]], &[z[2], z[3]], &params);
        Some((idx.map(|k| f + k), v))
    }

    fn build_jacobian_structure(&self) -> Vec<(usize, usize)> {
        let lay = &self.layout;
        let (nx, nu, d) = (lay.nx, lay.nu, self.scheme.degree);
        let mut s = Vec::new();
        for (p, st) in lay.stages.iter().enumerate() {
            for i in 0..st.intervals {
                for j in 1..=d {
                    let row = lay.defect_row(p, i, j);
                    let xj = lay.state(p, i, j);
                    let u = lay.input(p, i);
                    for k in 0..nx {
                        for r in 0..=d {
                            if r != j {
                                s.push((row + k, lay.state(p, i, r) + k));
                            }
                        }
                        for l in 0..nx {
                            s.push((row + k, xj + l));
                        }
                        for l in 0..nu {
                            s.push((row + k, u + l));
                        }
                        s.push((row + k, st.duration));
                    }
                }
                let row = lay.continuity_row(p, i);
                let next = lay.state(p, i + 1, 0);
                for k in 0..nx {
                    s.push((row + k, next + k));
                    for r in 0..=d {
                        s.push((row + k, lay.state(p, i, r) + k));
                    }
                }
            }
            if p + 1 < lay.stages.len() {
                let row = lay.link_row(p);
                let end = lay.stage_end(p);
                let start = lay.state(p + 1, 0, 0);
                for k in 0..nx {
                    s.push((row + k, start + k));
                    if self.model.has_jump(p) {
                        for l in 0..nx {
                            s.push((row + k, end + l));
                        }
                    } else {
                        s.push((row + k, end + k));
                    }
                }
            }
        }
        if let Some(row) = self.terminal_row {
            let (idx, _) = self.model.tcp().expect("checked in constructor");
            let f = lay.final_state();
            for k in idx {
                s.push((row, f + k));
            }
        }
        if let Some(row) = self.horizon_row {
            for st in &lay.stages {
                s.push((row, st.duration));
            }
        }
        s
    }

    fn build_hessian_structure(&self) -> Vec<(usize, usize)> {
        let lay = &self.layout;
        let (nx, nu) = (lay.nx, lay.nu);
        let mut s = Vec::new();
        self.for_each_point(|p, i, j| {
            let vars = self.point_vars(p, i, j);
            for a in 0..vars.len() {
                for b in 0..=a {
                    s.push(lower(vars[a], vars[b]));
                }
                s.push(lower(lay.stages[p].duration, vars[a]));
            }
        });
        for p in 0..lay.stages.len().saturating_sub(1) {
            if self.model.has_jump(p) {
                let end = lay.stage_end(p);
                for a in 0..nx {
                    for b in 0..=a {
                        s.push((end + a, end + b));
                    }
                }
            }
        }
        if self.terminal_row.is_some() || self.spec.objective == Objective::MaxTcpSpeed {
            let (idx, _) = self.model.tcp().expect("checked in constructor");
            let f = lay.final_state();
            for a in 0..4 {
                for b in 0..=a {
                    s.push(lower(f + idx[a], f + idx[b]));
                }
            }
        }
        if let Objective::Effort(_) = self.spec.objective {
            for (p, st) in lay.stages.iter().enumerate() {
                for i in 0..st.intervals {
                    let u = lay.input(p, i);
                    for l in 0..nu {
                        s.push((u + l, u + l));
                        s.push(lower(st.duration, u + l));
                    }
                }
            }
        }
        s
    }

    /// Indices of the flow arguments `(x, u)` at a collocation point.
    fn point_vars(&self, p: usize, i: usize, j: usize) -> Vec<usize> {
        let xj = self.layout.state(p, i, j);
        let u = self.layout.input(p, i);
        (0..self.layout.nx)
            .map(|k| xj + k)
            .chain((0..self.layout.nu).map(|l| u + l))
            .collect()
    }

    fn eval_flow_d1(&self, x: &[f64], p: usize, vars: &[usize]) -> Vec<D1> {
        let nx = self.layout.nx;
        let z: Vec<D1> = vars.iter().enumerate().map(|(k, &v)| Dual::variable(x[v], k)).collect();
        self.model.flow(p, &z[..nx], &z[nx..])
    }

    /// Time of every collocation node in stage-local coordinates, as
    /// `(interval, node) → τ` offsets on the normalized stage.
    pub fn node_fraction(&self, p: usize, i: usize, j: usize) -> f64 {
        (i as f64 + self.scheme.nodes[j]) / self.layout.stages[p].intervals as f64
    }

    /// Elimination order interleaving each interval's variables with its
    /// constraint rows, durations and global rows last.
    fn order_hint(&self) -> Vec<usize> {
        let lay = &self.layout;
        let (nx, d) = (lay.nx, self.scheme.degree);
        let n = lay.num_vars;
        let block = lay.block();
        let mut order = Vec::with_capacity(n + self.num_rows);
        for (p, st) in lay.stages.iter().enumerate() {
            for i in 0..st.intervals {
                let base = lay.state(p, i, 0);
                order.extend(base..base + block);
                let row = lay.defect_row(p, i, 1);
                order.extend((row..row + (d + 1) * nx).map(|r| n + r));
            }
            let end = lay.stage_end(p);
            order.extend(end..end + nx);
            if p + 1 < lay.stages.len() {
                let row = lay.link_row(p);
                order.extend((row..row + nx).map(|r| n + r));
            }
        }
        if let Some(r) = self.terminal_row {
            order.push(n + r);
        }
        order.extend(lay.stages.iter().map(|s| s.duration));
        if let Some(r) = self.horizon_row {
            order.push(n + r);
        }
        order
    }
}

impl<M: StageDynamics> NlpProblem for Transcription<M> {
    fn num_vars(&self) -> usize {
        self.layout.num_vars
    }

    fn num_constraints(&self) -> usize {
        self.num_rows
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }

    fn objective(&self, x: &[f64]) -> f64 {
        match &self.spec.objective {
            Objective::Zero => 0.0,
            Objective::MaxTcpSpeed => -self.terminal_speed(x).expect("checked in constructor"),
            Objective::Effort(w) => {
                let mut total = 0.0;
                for (p, st) in self.layout.stages.iter().enumerate() {
                    let h = self.h(x, p);
                    for i in 0..st.intervals {
                        let u = self.layout.input(p, i);
                        for (l, wl) in w.iter().enumerate() {
                            total += h * wl * x[u + l] * x[u + l];
                        }
                    }
                }
                total
            }
        }
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        match &self.spec.objective {
            Objective::Zero => {}
            Objective::MaxTcpSpeed => {
                let (idx, v) = self.terminal_speed_d2(x).expect("checked in constructor");
                for k in 0..4 {
                    g[idx[k]] -= v.grad[k];
                }
            }
            Objective::Effort(w) => {
                for (p, st) in self.layout.stages.iter().enumerate() {
                    let h = self.h(x, p);
                    let nint = st.intervals as f64;
                    for i in 0..st.intervals {
                        let u = self.layout.input(p, i);
                        for (l, wl) in w.iter().enumerate() {
                            g[u + l] += 2.0 * h * wl * x[u + l];
                            g[st.duration] += wl * x[u + l] * x[u + l] / nint;
                        }
                    }
                }
            }
        }
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let lay = &self.layout;
        let (nx, nu, d) = (lay.nx, lay.nu, self.scheme.degree);
        let sc = &self.scheme;
        for (p, st) in lay.stages.iter().enumerate() {
            let h = self.h(x, p);
            for i in 0..st.intervals {
                let u = lay.input(p, i);
                for j in 1..=d {
                    let row = lay.defect_row(p, i, j);
                    let xj = lay.state(p, i, j);
                    let f = self.model.flow(p, &x[xj..xj + nx], &x[u..u + nu]);
                    for k in 0..nx {
                        let mut der = 0.0;
                        for r in 0..=d {
                            der += sc.c[r][j] * x[lay.state(p, i, r) + k];
                        }
                        c[row + k] = der - h * f[k];
                    }
                }
                let row = lay.continuity_row(p, i);
                let next = lay.state(p, i + 1, 0);
                for k in 0..nx {
                    let mut end = 0.0;
                    for r in 0..=d {
                        end += sc.d[r] * x[lay.state(p, i, r) + k];
                    }
                    c[row + k] = x[next + k] - end;
                }
            }
            if p + 1 < lay.stages.len() {
                let row = lay.link_row(p);
                let end = lay.stage_end(p);
                let start = lay.state(p + 1, 0, 0);
                let g = self.model.link(p, &x[end..end + nx]);
                for k in 0..nx {
                    c[row + k] = x[start + k] - g[k];
                }
            }
        }
        if let Some(row) = self.terminal_row {
            let target = self.spec.terminal_speed_sq.expect("row exists");
            c[row] = self.terminal_speed(x).expect("checked in constructor") - target;
        }
        if let Some(row) = self.horizon_row {
            let total: f64 = lay.stages.iter().map(|s| x[s.duration]).sum();
            c[row] = total - self.spec.horizon.expect("row exists");
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac.clone()
    }

    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
        let lay = &self.layout;
        let (nx, nu, d) = (lay.nx, lay.nu, self.scheme.degree);
        let sc = &self.scheme;
        let mut k_out = 0;
        let mut push = |v: f64| {
            vals[k_out] = v;
            k_out += 1;
        };
        for (p, st) in lay.stages.iter().enumerate() {
            let h = self.h(x, p);
            let nint = st.intervals as f64;
            for i in 0..st.intervals {
                for j in 1..=d {
                    let vars = self.point_vars(p, i, j);
                    let f = self.eval_flow_d1(x, p, &vars);
                    for k in 0..nx {
                        for r in 0..=d {
                            if r != j {
                                push(sc.c[r][j]);
                            }
                        }
                        for l in 0..nx {
                            let diag = if l == k { sc.c[j][j] } else { 0.0 };
                            push(diag - h * f[k].eps[l]);
                        }
                        for l in 0..nu {
                            push(-h * f[k].eps[nx + l]);
                        }
                        push(-f[k].re / nint);
                    }
                }
                for _ in 0..nx {
                    push(1.0);
                    for r in 0..=d {
                        push(-sc.d[r]);
                    }
                }
            }
            if p + 1 < lay.stages.len() {
                let end = lay.stage_end(p);
                if self.model.has_jump(p) {
                    let z: Vec<D1> = (0..nx).map(|l| Dual::variable(x[end + l], l)).collect();
                    let g = self.model.link(p, &z);
                    for gk in g.iter().take(nx) {
                        push(1.0);
                        for l in 0..nx {
                            push(-gk.eps[l]);
                        }
                    }
                } else {
                    for _ in 0..nx {
                        push(1.0);
                        push(-1.0);
                    }
                }
            }
        }
        if self.terminal_row.is_some() {
            let (_, v) = self.terminal_speed_d2(x).expect("checked in constructor");
            for k in 0..4 {
                push(v.grad[k]);
            }
        }
        if self.horizon_row.is_some() {
            for _ in &lay.stages {
                push(1.0);
            }
        }
        debug_assert_eq!(k_out, self.jac.len());
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess.clone()
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], vals: &mut [f64]) {
        let lay = &self.layout;
        let (nx, nu) = (lay.nx, lay.nu);
        let mut k_out = 0;
        let mut push = |v: f64| {
            vals[k_out] = v;
            k_out += 1;
        };
        self.for_each_point(|p, i, j| {
            let h = self.h(x, p);
            let nint = lay.stages[p].intervals as f64;
            let vars = self.point_vars(p, i, j);
            let z: Vec<D2> = vars
                .iter()
                .enumerate()
                .map(|(k, &v)| Dual2::variable(x[v], k))
                .collect();
            let f = self.model.flow(p, &z[..nx], &z[nx..]);
            let row = lay.defect_row(p, i, j);
            let lam = &lambda[row..row + nx];
            let nv = vars.len();
            for a in 0..nv {
                for b in 0..=a {
                    let s: f64 = (0..nx).map(|k| lam[k] * f[k].hess[a][b]).sum();
                    push(-h * s);
                }
                let g: f64 = (0..nx).map(|k| lam[k] * f[k].grad[a]).sum();
                push(-g / nint);
            }
        });
        for p in 0..lay.stages.len().saturating_sub(1) {
            if self.model.has_jump(p) {
                let end = lay.stage_end(p);
                let row = lay.link_row(p);
                let z: Vec<D2> = (0..nx).map(|l| Dual2::variable(x[end + l], l)).collect();
                let g = self.model.link(p, &z);
                for a in 0..nx {
                    for b in 0..=a {
                        let s: f64 = (0..nx).map(|k| lambda[row + k] * g[k].hess[a][b]).sum();
                        push(-s);
                    }
                }
            }
        }
        if self.terminal_row.is_some() || self.spec.objective == Objective::MaxTcpSpeed {
            let (_, v) = self.terminal_speed_d2(x).expect("checked in constructor");
            let mut w = 0.0;
            if let Some(r) = self.terminal_row {
                w += lambda[r];
            }
            if self.spec.objective == Objective::MaxTcpSpeed {
                w -= obj_factor;
            }
            for a in 0..4 {
                for b in 0..=a {
                    push(w * v.hess[a][b]);
                }
            }
        }
        if let Objective::Effort(wts) = &self.spec.objective {
            for (p, st) in lay.stages.iter().enumerate() {
                let h = self.h(x, p);
                let nint = st.intervals as f64;
                for i in 0..st.intervals {
                    let u = lay.input(p, i);
                    for l in 0..nu {
                        push(obj_factor * 2.0 * h * wts[l]);
                        push(obj_factor * 2.0 * wts[l] * x[u + l] / nint);
                    }
                }
            }
        }
        debug_assert_eq!(k_out, self.hess.len());
    }

    fn kkt_order_hint(&self) -> Option<Vec<usize>> {
        Some(self.order_hint())
    }
}
