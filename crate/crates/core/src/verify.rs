//! Property suites behind `bsa verify`. Every check reports the measured
//! worst case next to its tolerance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Mat4;
use crate::error::Result;
use crate::friction::{ClutchSchedule, FrictionParams};
use crate::hybrid::{impact_map, kinetic_metric, BsaMode, BsaState, ConstraintMatrix, Stage, SwitchingSignal};
use crate::nlp::{derivative_check, InteriorPoint, SolverInterface, SolverStatus};
use crate::ocp::{
    initial_guess, CollocationKind, CollocationScheme, GuessStrategy, LinearSystem, Objective, StagedOcp,
    Transcription, TranscriptionSpec,
};
use crate::params::PendulumParams;
use crate::sim::{simulate_bsa, simulate_friction, simulate_vsa, InputSchedule, IntegratorConfig, Trajectory};
use crate::vsa::VsaState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyReport {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// Passes when `measured ≥ tolerance`.
    pub fn at_least(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured >= tolerance,
        }
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<40} measured {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

/// Which constraint the impact map projects onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintFixture {
    Exact,
    /// Projects onto a perturbed matrix while checking against the exact
    /// one; the suite must catch this.
    Corrupted,
}

/// Random SPD matrix `L Lᵀ + ½ I` with entries of `L` in `[−1, 1]`.
pub fn random_spd(rng: &mut impl Rng) -> Mat4<f64> {
    let l: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| l[i * 4 + k] * l[j * 4 + k]).sum::<f64>();
        }
        m[i][i] += 0.5;
    }
    m
}

/// Impact-map suite over `cases` random inertias, modes and pre-impact
/// velocities: constraint residual, kinetic-energy increase and
/// idempotence, all relative to `max(1, ‖ξ̇⁻‖)`.
pub fn impact_projection(cases: usize, seed: u64, fixture: ConstraintFixture) -> Result<Vec<PropertyReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut res, mut gain, mut idem) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let pi = random_spd(&mut rng);
        let mode = BsaMode::from_index(rng.gen_range(1..=4))?;
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let exact = mode.constraint();
        let used = match fixture {
            ConstraintFixture::Exact => exact.clone(),
            ConstraintFixture::Corrupted => {
                let mut rows = exact.rows().to_vec();
                rows[0][0] += 0.1;
                ConstraintMatrix::from_rows(rows)
            }
        };
        let (plus, _) = impact_map(&pi, &used, &v)?;
        let r = exact.apply(&plus).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        res = res.max(r / scale);
        let de = kinetic_metric(&pi, &plus) - kinetic_metric(&pi, &v);
        gain = gain.max(de / kinetic_metric(&pi, &v).max(1.0));
        let (twice, _) = impact_map(&pi, &used, &plus)?;
        let d = (0..4).fold(0.0f64, |m, i| m.max((twice[i] - plus[i]).abs()));
        idem = idem.max(d / scale);
    }
    Ok(vec![
        PropertyReport::at_most("impact: constraint residual", res, 1e-10),
        PropertyReport::at_most("impact: kinetic energy gain", gain, 1e-12),
        PropertyReport::at_most("impact: idempotence", idem, 1e-12),
    ])
}

/// Largest `|E(t) − E(0) − W(t) + D(t)|` along a trajectory.
pub fn energy_balance_error(tr: &Trajectory) -> f64 {
    let e0 = tr.samples[0].energy.total();
    tr.samples
        .iter()
        .map(|s| (s.energy.total() - e0 - s.work[0] - s.work[1] + s.dissipated).abs())
        .fold(0.0, f64::max)
}

fn launch_inputs() -> Result<InputSchedule> {
    InputSchedule::new(
        vec![0.0, 0.1, 0.15],
        vec![vec![2.0, 2.0], vec![2.0, -1.0], vec![0.0, 2.0]],
    )
}

/// Energy bookkeeping of the three simulators on a launch-like schedule.
pub fn energy_audits(params: &PendulumParams, cfg: &IntegratorConfig) -> Result<Vec<PropertyReport>> {
    let inputs = launch_inputs()?;
    let sigma = SwitchingSignal::new(vec![
        Stage {
            mode: BsaMode::SeaDec,
            duration: 0.15,
        },
        Stage {
            mode: BsaMode::DecSea,
            duration: 0.05,
        },
    ])?;
    let ideal = simulate_bsa(params, &BsaState::equilibrium(BsaMode::SeaDec), &inputs, &sigma, cfg)?;
    let vsa_inputs = InputSchedule::new(
        vec![0.0, 0.1],
        vec![vec![2.0, 2.0, 300.0, -200.0], vec![-1.0, 2.0, -400.0, 500.0]],
    )?;
    let vsa = simulate_vsa(params, &VsaState::equilibrium([50.0, 50.0]), &vsa_inputs, 0.2, cfg)?;
    let schedule = ClutchSchedule::from_mode_sequence(&[BsaMode::SeaDec, BsaMode::DecSea], &[0.14], 30.0, 0.02, 0.02)?;
    let fric = simulate_friction(
        params,
        &[0.0; 10],
        &inputs,
        &schedule,
        &FrictionParams::default(),
        0.2,
        cfg,
    )?;
    Ok(vec![
        PropertyReport::at_most("energy: ideal clutch balance [J]", energy_balance_error(&ideal), 1e-4),
        PropertyReport::at_most(
            "energy: variable stiffness balance [J]",
            energy_balance_error(&vsa),
            1e-4,
        ),
        PropertyReport::at_most("energy: friction clutch balance [J]", energy_balance_error(&fric), 1e-4),
    ])
}

/// Automatic against central-difference derivatives of both launch
/// problems at forward-simulated points.
pub fn ad_vs_fd(params: &PendulumParams) -> Result<PropertyReport> {
    let mut worst = 0.0f64;
    let bsa = StagedOcp::bsa(*params, &[BsaMode::SeaDec, BsaMode::DecSea], 0.2, 6);
    let vsa = StagedOcp::vsa(*params, 0.2, 6);
    for seed in 1..=2 {
        let g = initial_guess(&bsa, GuessStrategy::ForwardSim { seed })?;
        let (j, gr) = derivative_check(&bsa.bsa_transcription()?, &g.x, 1e-6);
        worst = worst.max(j).max(gr);
        let g = initial_guess(&vsa, GuessStrategy::ForwardSim { seed })?;
        let (j, gr) = derivative_check(&vsa.vsa_transcription()?, &g.x, 1e-6);
        worst = worst.max(j).max(gr);
    }
    Ok(PropertyReport::at_most("derivatives: AD vs FD (relative)", worst, 1e-5))
}

/// Damped oscillator used as the linear test system.
pub fn linear_test_system() -> LinearSystem {
    LinearSystem {
        a: vec![vec![0.0, 1.0], vec![-4.0, -0.4]],
        b: vec![],
    }
}

/// Endpoint of the transcribed linear test system on `[0, horizon]` with
/// `intervals` equal intervals, solved as a feasibility problem.
pub fn transcribed_endpoint(
    model: &LinearSystem,
    x0: &[f64],
    horizon: f64,
    intervals: usize,
    degree: usize,
    kind: CollocationKind,
) -> Result<Vec<f64>> {
    let nx = x0.len();
    let spec = TranscriptionSpec {
        intervals: vec![intervals],
        objective: Objective::Zero,
        terminal_speed_sq: None,
        horizon: Some(horizon),
        duration_bounds: vec![(horizon, horizon)],
        state_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); nx],
        input_bounds: vec![],
        initial_state: x0.to_vec(),
        free_initial: vec![],
    };
    let t = Transcription::new(model.clone(), CollocationScheme::new(degree, kind)?, spec)?;
    let mut guess = vec![0.0; t.layout.num_vars];
    for (k, g) in guess.iter_mut().enumerate() {
        *g = x0[k % nx];
    }
    guess[t.layout.stages[0].duration] = horizon;
    let sol = InteriorPoint::default().solve(&t, &guess)?;
    if sol.status != SolverStatus::Optimal {
        return Err(crate::Error::Solver(format!("linear test system: {:?}", sol.status)));
    }
    let end = t.layout.final_state();
    Ok(sol.x[end..end + nx].to_vec())
}

/// Observed endpoint convergence orders of the degree-3 transcription under
/// repeated halving, against the exact matrix exponential.
pub fn mesh_convergence_orders(kind: CollocationKind) -> Result<Vec<f64>> {
    let model = linear_test_system();
    let x0 = [1.0, 0.0];
    let horizon = 2.0;
    let a = DMatrix::from_fn(2, 2, |i, j| model.a[i][j]);
    let exact = (a * horizon).exp() * nalgebra::DVector::from_column_slice(&x0);
    let errors: Vec<f64> = [2usize, 4, 8, 16]
        .iter()
        .map(|&n| {
            let e = transcribed_endpoint(&model, &x0, horizon, n, 3, kind)?;
            Ok((0..2).map(|i| (e[i] - exact[i]).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Largest state difference between the clutch-switched model with
/// connected springs and spring inertia `js` and the fixed-stiffness
/// variable-stiffness model, over `cases` random starts integrated for
/// `horizon`.
pub fn cross_model_error(
    params: &PendulumParams,
    js: f64,
    cases: usize,
    horizon: f64,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let cfg = &IntegratorConfig {
        constraint_tol: cfg.constraint_tol.max(1e-5),
        ..*cfg
    };
    let mut p = *params;
    p.js1 = js;
    p.js2 = js;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let sigma = SwitchingSignal::new(vec![Stage {
        mode: BsaMode::SeaSea,
        duration: horizon,
    }])?;
    for _ in 0..cases {
        let theta: [f64; 2] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        let q: [f64; 2] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let qd: [f64; 2] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bx = BsaState {
            t: 0.0,
            mode: BsaMode::SeaSea,
            theta,
            xi: [q[0], q[1], q[0], q[1]],
            xidot: [qd[0], qd[1], qd[0], qd[1]],
        };
        let vx = VsaState {
            theta,
            k: p.stiffness(),
            q,
            qdot: qd,
        };
        let b = simulate_bsa(&p, &bx, &InputSchedule::constant(u.clone()), &sigma, cfg)?;
        let v = simulate_vsa(
            &p,
            &vx,
            &InputSchedule::constant(vec![u[0], u[1], 0.0, 0.0]),
            horizon,
            cfg,
        )?;
        let (bl, vl) = (b.last()?, v.last()?);
        // θ, q, q̇ in both layouts
        let pairs = [(0, 0), (1, 1), (4, 4), (5, 5), (8, 6), (9, 7)];
        for (i, j) in pairs {
            worst = worst.max((bl.x[i] - vl.x[j]).abs());
        }
    }
    Ok(worst)
}

/// The full suite with default settings.
pub fn run_all(params: &PendulumParams, cfg: &IntegratorConfig) -> Result<Vec<PropertyReport>> {
    let mut out = impact_projection(10_000, 7, ConstraintFixture::Exact)?;
    out.extend(energy_audits(params, cfg)?);
    out.push(ad_vs_fd(params)?);
    let orders = mesh_convergence_orders(CollocationKind::Legendre)?;
    out.push(PropertyReport::at_least(
        "collocation: endpoint order",
        orders.iter().copied().fold(f64::INFINITY, f64::min),
        5.0,
    ));
    out.push(PropertyReport::at_most(
        "cross-model: connected springs vs fixed K",
        cross_model_error(params, 1e-9, 100, 0.5, 11, cfg)?,
        1e-4,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_constraint_is_caught() {
        let good = impact_projection(200, 1, ConstraintFixture::Exact).unwrap();
        assert!(good.iter().all(|r| r.passed), "{good:?}");
        let bad = impact_projection(200, 1, ConstraintFixture::Corrupted).unwrap();
        assert!(!bad[0].passed);
        assert!(bad[0].measured > 1e-3);
    }

    #[test]
    fn random_spd_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_spd(&mut rng);
            let d = DMatrix::from_fn(4, 4, |i, j| m[i][j]);
            assert!(d.clone().cholesky().is_some());
            assert!((d.clone() - d.transpose()).abs().max() < 1e-15);
        }
    }
}
