//! Runs experiments and writes their reports and artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bsa_core::dynamics::joint_positions;
use bsa_core::experiments::{
    exchange_cycles, potential_peak_fraction, run_sim3, solve_sim1, solve_sim2, Settings, Sim3Outcome,
};
use bsa_core::hybrid::BsaMode;
use bsa_core::nlp::{solver_by_name, SolverInterface, SolverStatus};
use bsa_core::ocp::{OcpModel, OcpSolution};
use bsa_core::power::WorkSummary;
use bsa_core::sim::{resimulate, Event, Trajectory};
use bsa_core::PendulumParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, ExperimentId};
use crate::svg::{line_plot, sketch, Series};

/// Relative prominence of an energy exchange cycle.
pub const CYCLE_PROMINENCE: f64 = 0.25;
const KEYFRAMES: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Core(#[from] bsa_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.into(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(bsa_core::Error::from)?;
    write_text(path, &(text + "\n"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionReport {
    pub command_times: Vec<f64>,
    pub ideal_v_tcp: f64,
    pub final_v_tcp: f64,
    pub velocity_ratio: f64,
    pub ideal_peak_spring2: f64,
    pub peak_spring2: f64,
    pub work: WorkSummary,
    pub dissipated: f64,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub model: OcpModel,
    pub config_hash: String,
    pub solver: String,
    pub status: SolverStatus,
    pub horizon: f64,
    pub cost: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    /// Final end-effector speed of the re-simulated inputs [m/s].
    pub final_v_tcp: f64,
    /// Final end-effector speed of the collocation solution [m/s].
    pub predicted_v_tcp: f64,
    pub resim_relative_deviation: f64,
    /// Stage durations `T_p` [s].
    pub stage_durations: Vec<f64>,
    pub switch_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<BsaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_stiffness: Option<[f64; 2]>,
    pub work: WorkSummary,
    /// Time of the potential-energy peak over the horizon.
    pub peak_potential_fraction: f64,
    pub exchange_cycles: usize,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionReport>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonRun {
    pub t_f: f64,
    pub directory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiment: String,
    pub model: OcpModel,
    pub config_hash: String,
    pub speed: f64,
    pub runs: Vec<HorizonRun>,
    pub wall_clock_s: f64,
}

fn build_report(
    cfg: &ExperimentConfig,
    solver: &str,
    sol: &OcpSolution,
    tr: &Trajectory,
    started: Instant,
) -> Result<RunReport, CliError> {
    let final_v = tr.final_v_tcp()?;
    Ok(RunReport {
        experiment: cfg.experiment.name().into(),
        model: sol.model,
        config_hash: cfg.hash(),
        solver: solver.into(),
        status: sol.status,
        horizon: sol.horizon(),
        cost: sol.cost,
        iterations: sol.iterations,
        primal_infeasibility: sol.primal_infeasibility,
        final_v_tcp: final_v,
        predicted_v_tcp: sol.final_v_tcp,
        resim_relative_deviation: (final_v - sol.final_v_tcp).abs() / sol.final_v_tcp.abs().max(1e-12),
        stage_durations: sol.durations.clone(),
        switch_times: sol.switch_times(),
        modes: sol.stages.iter().filter_map(|s| s.mode).collect(),
        initial_stiffness: (sol.model == OcpModel::Vsa).then(|| {
            let x = sol.initial_state();
            [x[2], x[3]]
        }),
        work: tr.work_summary()?,
        peak_potential_fraction: potential_peak_fraction(tr)?,
        exchange_cycles: exchange_cycles(tr, CYCLE_PROMINENCE),
        events: tr.events.clone(),
        friction: None,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

fn csv_series(tr: &Trajectory, f: impl Fn(&bsa_core::sim::Sample) -> f64) -> Vec<(f64, f64)> {
    tr.samples.iter().map(|s| (s.t, f(s))).collect()
}

/// Pendulum poses at `n` equally spaced times: rows of
/// `t, x_base, y_base, x_elbow, y_elbow, x_tip, y_tip`.
fn keyframes(tr: &Trajectory, params: &PendulumParams, n: usize) -> Vec<(f64, [(f64, f64); 3])> {
    if tr.is_empty() {
        return vec![];
    }
    let t_end = tr.samples.last().map_or(0.0, |s| s.t);
    (0..n)
        .map(|k| {
            let t = t_end * k as f64 / (n - 1).max(1) as f64;
            let i = tr.samples.partition_point(|s| s.t < t).min(tr.len() - 1);
            let (q, _) = tr.link_state(i);
            let [e, p] = joint_positions(&q, params);
            (tr.samples[i].t, [(0.0, 0.0), (e[0], e[1]), (p[0], p[1])])
        })
        .collect()
}

/// Writes the trajectory artifacts of one model run into `dir`.
fn write_trajectory_artifacts(
    dir: &Path,
    prefix: &str,
    tr: &Trajectory,
    params: &PendulumParams,
) -> Result<(), CliError> {
    let p = dir.join(format!("{prefix}trajectory.csv"));
    tr.write_csv(create(&p)?)?;
    let p = dir.join(format!("{prefix}power.csv"));
    tr.write_power_csv(create(&p)?)?;
    let energy = line_plot(
        "Energy",
        "t [s]",
        "E [J]",
        &[
            Series::new("E_kin", csv_series(tr, |s| s.energy.kinetic())),
            Series::new("E_pot", csv_series(tr, |s| s.energy.potential())),
            Series::new("E_spring_1", csv_series(tr, |s| s.energy.potential_spring[0])),
            Series::new("E_spring_2", csv_series(tr, |s| s.energy.potential_spring[1])),
        ],
    );
    write_text(&dir.join(format!("{prefix}energy.svg")), &energy)?;
    let power = line_plot(
        "Actuator power",
        "t [s]",
        "P [W]",
        &[
            Series::new("P_in_1", csv_series(tr, |s| s.power.p_in[0])),
            Series::new("P_in_2", csv_series(tr, |s| s.power.p_in[1])),
            Series::new("P_out_1", csv_series(tr, |s| s.power.p_out[0])),
            Series::new("P_out_2", csv_series(tr, |s| s.power.p_out[1])),
        ],
    );
    write_text(&dir.join(format!("{prefix}power.svg")), &power)?;
    let v = line_plot(
        "End-effector speed",
        "t [s]",
        "v [m/s]",
        &[Series::new("v_tcp", csv_series(tr, |s| s.v_tcp))],
    );
    write_text(&dir.join(format!("{prefix}velocity.svg")), &v)?;
    let frames = keyframes(tr, params, KEYFRAMES);
    let p = dir.join(format!("{prefix}keyframes.csv"));
    let mut w = create(&p)?;
    writeln!(w, "t,x_base,y_base,x_elbow,y_elbow,x_tip,y_tip").map_err(io_err(&p))?;
    for (t, f) in &frames {
        writeln!(
            w,
            "{t:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            f[0].0, f[0].1, f[1].0, f[1].1, f[2].0, f[2].1
        )
        .map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;
    let poses: Vec<[(f64, f64); 3]> = frames.into_iter().map(|(_, f)| f).collect();
    write_text(&dir.join(format!("{prefix}sketch.svg")), &sketch("Poses", &poses))?;
    Ok(())
}

fn write_solution(dir: &Path, sol: &OcpSolution) -> Result<(), CliError> {
    write_json(&dir.join("solution.json"), sol)?;
    let names = match sol.model {
        OcpModel::Bsa => bsa_core::sim::ModelKind::Bsa,
        OcpModel::Vsa => bsa_core::sim::ModelKind::Vsa,
    };
    let p = dir.join("collocation.csv");
    let mut w = create(&p)?;
    let mut cols = vec!["t"];
    cols.extend(names.state_names());
    writeln!(w, "{}", cols.join(",")).map_err(io_err(&p))?;
    for (t, x) in sol.dense_states() {
        let row: Vec<String> = std::iter::once(format!("{t:.9}"))
            .chain(x.iter().map(|v| format!("{v:.9e}")))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(io_err(&p))?;
    }
    w.flush().map_err(io_err(&p))
}

fn make_solver(cfg: &ExperimentConfig) -> Result<Box<dyn SolverInterface>, CliError> {
    solver_by_name(&cfg.solver, cfg.solver_options).map_err(|e| {
        CliError::Config(ConfigError::Field {
            field: "solver".into(),
            reason: e.to_string(),
        })
    })
}

fn mkdir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn check_status(report: &RunReport) -> Result<(), CliError> {
    if report.status.is_success() {
        Ok(())
    } else {
        Err(CliError::Solver(format!(
            "{} ended with status {:?}; diagnostics in summary.json",
            report.experiment, report.status
        )))
    }
}

/// Solves, re-simulates and writes the artifacts of one optimal control run.
fn single_run(
    cfg: &ExperimentConfig,
    dir: &Path,
    solve: impl FnOnce(&Settings, &dyn SolverInterface) -> bsa_core::Result<OcpSolution>,
) -> Result<(RunReport, OcpSolution, Trajectory), CliError> {
    let started = Instant::now();
    mkdir(dir)?;
    let settings = cfg.settings();
    let solver = make_solver(cfg)?;
    let sol = solve(&settings, solver.as_ref()).map_err(|e| {
        let _ = write_text(&dir.join("error.txt"), &format!("{e}\n"));
        CliError::Solver(e.to_string())
    })?;
    let tr = resimulate(&sol, &settings.integrator)?;
    let report = build_report(cfg, solver.name(), &sol, &tr, started)?;
    write_solution(dir, &sol)?;
    write_trajectory_artifacts(dir, "", &tr, &settings.params)?;
    Ok((report, sol, tr))
}

fn model_of(id: ExperimentId, cfg: &ExperimentConfig) -> OcpModel {
    match id {
        ExperimentId::Sim1Vsa | ExperimentId::Sim2Vsa => OcpModel::Vsa,
        ExperimentId::Sweep => cfg.model,
        _ => OcpModel::Bsa,
    }
}

/// Summary printed by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Summary {
    Sweep(SweepReport),
    Run(Box<RunReport>),
}

/// Runs the configured experiment, writing everything into `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, CliError> {
    cfg.validate()?;
    let model = model_of(cfg.experiment, cfg);
    let horizon = cfg.run_horizon();
    match cfg.experiment {
        ExperimentId::Sim1Bsa | ExperimentId::Sim1Vsa => {
            let (report, _, _) = single_run(cfg, dir, |s, solver| solve_sim1(model, horizon, s, solver))?;
            write_json(&dir.join("summary.json"), &report)?;
            check_status(&report)?;
            Ok(Summary::Run(Box::new(report)))
        }
        ExperimentId::Sim2Bsa | ExperimentId::Sim2Vsa => {
            let speed = cfg.ocp.speed;
            let (report, _, _) = single_run(cfg, dir, |s, solver| solve_sim2(model, horizon, speed, s, solver, None))?;
            write_json(&dir.join("summary.json"), &report)?;
            check_status(&report)?;
            Ok(Summary::Run(Box::new(report)))
        }
        ExperimentId::Sim3Friction => {
            let started = Instant::now();
            let (mut report, sol, _) = single_run(cfg, dir, |s, solver| solve_sim1(OcpModel::Bsa, horizon, s, solver))?;
            if let Err(e) = check_status(&report) {
                write_json(&dir.join("summary.json"), &report)?;
                return Err(e);
            }
            let o: Sim3Outcome = run_sim3(
                &sol,
                &cfg.clutch.replay(),
                cfg.clutch.schedule.as_ref(),
                &cfg.integrator,
            )?;
            write_trajectory_artifacts(dir, "friction_", &o.friction, &cfg.params)?;
            let cmp = line_plot(
                "Ideal and friction clutches",
                "t [s]",
                "E_spring_2 [J] / v [m/s]",
                &[
                    Series::new(
                        "E_spring_2 ideal",
                        csv_series(&o.ideal, |s| s.energy.potential_spring[1]),
                    ),
                    Series::new(
                        "E_spring_2 friction",
                        csv_series(&o.friction, |s| s.energy.potential_spring[1]),
                    ),
                    Series::new("v ideal", csv_series(&o.ideal, |s| s.v_tcp)),
                    Series::new("v friction", csv_series(&o.friction, |s| s.v_tcp)),
                ],
            );
            write_text(&dir.join("comparison.svg"), &cmp)?;
            report.friction = Some(FrictionReport {
                command_times: o.command_times.clone(),
                ideal_v_tcp: o.ideal_v_tcp,
                final_v_tcp: o.friction_v_tcp,
                velocity_ratio: o.velocity_ratio,
                ideal_peak_spring2: o.ideal_peak_spring2,
                peak_spring2: o.friction_peak_spring2,
                work: o.friction.work_summary()?,
                dissipated: o.friction.last()?.dissipated,
                events: o.friction.events.clone(),
            });
            report.wall_clock_s = started.elapsed().as_secs_f64();
            write_json(&dir.join("summary.json"), &report)?;
            Ok(Summary::Run(Box::new(report)))
        }
        ExperimentId::Sweep => sweep(cfg, dir).map(Summary::Sweep),
    }
}

fn horizon_dir(t_f: f64) -> String {
    format!("tf_{t_f:.3}")
}

/// Effort study over `cfg.ocp.horizons`: sequential with continuation, or
/// concurrent and independent.
pub fn sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<SweepReport, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    mkdir(dir)?;
    let model = cfg.model;
    let speed = cfg.ocp.speed;
    let one = |t_f: f64, warm: Option<&OcpSolution>| -> (HorizonRun, Option<(OcpSolution, Trajectory)>) {
        let sub = horizon_dir(t_f);
        let mut c = cfg.clone();
        c.horizon = Some(t_f);
        c.experiment = match model {
            OcpModel::Bsa => ExperimentId::Sim2Bsa,
            OcpModel::Vsa => ExperimentId::Sim2Vsa,
        };
        let res = single_run(&c, &dir.join(&sub), |s, solver| {
            solve_sim2(model, t_f, speed, s, solver, warm)
        });
        match res {
            Ok((report, sol, tr)) => {
                let ok = report.status.is_success();
                let _ = write_json(&dir.join(&sub).join("summary.json"), &report);
                let run = HorizonRun {
                    t_f,
                    directory: sub,
                    error: (!ok).then(|| format!("solver status {:?}", report.status)),
                    report: Some(report),
                };
                (run, ok.then_some((sol, tr)))
            }
            Err(e) => (
                HorizonRun {
                    t_f,
                    directory: sub,
                    report: None,
                    error: Some(e.to_string()),
                },
                None,
            ),
        }
    };
    let results: Vec<(HorizonRun, Option<(OcpSolution, Trajectory)>)> = if cfg.ocp.continuation {
        let mut out = Vec::new();
        let mut prev: Option<OcpSolution> = None;
        for &t_f in &cfg.ocp.horizons {
            let r = one(t_f, prev.as_ref());
            if let Some((sol, _)) = &r.1 {
                prev = Some(sol.clone());
            }
            out.push(r);
        }
        out
    } else {
        cfg.ocp.horizons.par_iter().map(|&t_f| one(t_f, None)).collect()
    };

    let p = dir.join("sweep.csv");
    let mut w = create(&p)?;
    writeln!(w, "t_f,t,s,E_kin,E_pot,E_spring_1,E_spring_2,v_tcp,P_in_1,P_in_2").map_err(io_err(&p))?;
    let mut series = Vec::new();
    for (run, data) in &results {
        let Some((_, tr)) = data else { continue };
        for s in &tr.samples {
            writeln!(
                w,
                "{:.3},{:.9},{:.9},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                run.t_f,
                s.t,
                s.t / run.t_f,
                s.energy.kinetic(),
                s.energy.potential(),
                s.energy.potential_spring[0],
                s.energy.potential_spring[1],
                s.v_tcp,
                s.power.p_in[0],
                s.power.p_in[1]
            )
            .map_err(io_err(&p))?;
        }
        series.push(Series::new(
            format!("t_f = {:.1}", run.t_f),
            csv_series(tr, |s| s.energy.potential()),
        ));
    }
    w.flush().map_err(io_err(&p))?;
    write_text(
        &dir.join("sweep.svg"),
        &line_plot("Potential energy per horizon", "t [s]", "E_pot [J]", &series),
    )?;
    let report = SweepReport {
        experiment: ExperimentId::Sweep.name().into(),
        model,
        config_hash: cfg.hash(),
        speed,
        runs: results.into_iter().map(|(r, _)| r).collect(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("summary.json"), &report)?;
    let failed: Vec<String> = report
        .runs
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| format!("t_f = {}: {}", r.t_f, r.error.as_deref().unwrap_or("")))
        .collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Solver(failed.join("; ")))
    }
}
