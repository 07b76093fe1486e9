#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod runner;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsa_core::ocp::OcpModel;
use bsa_core::verify;
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, ExperimentId};
use runner::{CliError, Summary};

/// Optimal control and simulation experiments for bi-stiffness actuated
/// double pendulums.
#[derive(Parser)]
#[command(name = "bsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $BSA_OUT_DIR/<experiment>, or ./out/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// First multistart seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for multistarts and sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// NLP solver backend.
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Experiment to run; overrides the configuration.
        experiment: Option<ExperimentId>,
        #[command(flatten)]
        common: Common,
    },
    /// Minimal-effort study over a range of horizons.
    Sweep {
        #[arg(long, value_parser = parse_model)]
        model: Option<OcpModel>,
        /// Solve the horizons independently instead of warm starting each
        /// from the previous one.
        #[arg(long)]
        no_continuation: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check the numerical properties of the models and transcription.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the summary of a finished run.
    Show {
        /// Run directory or summary file.
        path: PathBuf,
    },
}

fn parse_model(s: &str) -> Result<OcpModel, String> {
    match s {
        "bsa" => Ok(OcpModel::Bsa),
        "vsa" => Ok(OcpModel::Vsa),
        _ => Err(format!("unknown model `{s}` (bsa, vsa)")),
    }
}

fn load(path: Option<&Path>, fallback: ExperimentId) -> Result<ExperimentConfig, CliError> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(fallback),
    })
}

fn apply(cfg: &mut ExperimentConfig, common: &Common) -> Result<PathBuf, CliError> {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &common.solver {
        cfg.solver = s.clone();
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(ConfigError::Field {
                field: "threads".into(),
                reason: "must be at least 1".into(),
            }
            .into());
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    cfg.validate()?;
    let out = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| {
        std::env::var_os("BSA_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
            .join(cfg.experiment.name())
    });
    Ok(out)
}

fn print_run(r: &runner::RunReport, dir: &Path) {
    println!("experiment   {}", r.experiment);
    println!("status       {:?}", r.status);
    println!("cost         {:.6}", r.cost);
    println!("horizon      {:.3} s", r.horizon);
    println!(
        "v_tcp(t_f)   {:.4} m/s (collocation {:.4})",
        r.final_v_tcp, r.predicted_v_tcp
    );
    if !r.stage_durations.is_empty() {
        let d: Vec<String> = r.stage_durations.iter().map(|d| format!("{d:.4}")).collect();
        println!("stages       {} s", d.join(", "));
    }
    println!(
        "work         +{:.3} / {:.3} J, net {:.3} J",
        r.work.positive_total(),
        r.work.negative[0] + r.work.negative[1],
        r.work.net
    );
    println!(
        "E_pot peak   at {:.3} of t_f, {} exchange cycles",
        r.peak_potential_fraction, r.exchange_cycles
    );
    if let Some(f) = &r.friction {
        println!(
            "friction     v {:.4} m/s, ratio {:.4}, E_spring_2 peak {:.3} J (ideal {:.3} J)",
            f.final_v_tcp, f.velocity_ratio, f.peak_spring2, f.ideal_peak_spring2
        );
    }
    println!("output       {}", dir.display());
}

fn print_summary(s: &Summary, dir: &Path) {
    match s {
        Summary::Run(r) => print_run(r, dir),
        Summary::Sweep(sw) => {
            println!("sweep        {:?} at {:.2} m/s", sw.model, sw.speed);
            println!(
                "{:>6} {:>16} {:>10} {:>10} {:>7}",
                "t_f", "status", "cost", "E_pot@", "cycles"
            );
            for run in &sw.runs {
                match &run.report {
                    Some(r) => println!(
                        "{:>6.2} {:>16} {:>10.5} {:>10.3} {:>7}",
                        run.t_f,
                        format!("{:?}", r.status),
                        r.cost,
                        r.peak_potential_fraction,
                        r.exchange_cycles
                    ),
                    None => println!("{:>6.2} {:>16}", run.t_f, "failed"),
                }
            }
            println!("output       {}", dir.display());
        }
    }
}

fn show(path: &Path) -> Result<(), CliError> {
    let file = if path.is_dir() {
        path.join("summary.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|source| CliError::Io {
        path: file.clone(),
        source,
    })?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(ConfigError::Parse {
            path: file.clone(),
            message: e.to_string(),
        })
    })?;
    print_summary(&s, file.parent().unwrap_or(Path::new(".")));
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { experiment, common } => {
            let mut cfg = load(common.config.as_deref(), experiment.unwrap_or(ExperimentId::Sim1Bsa))?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            let out = apply(&mut cfg, &common)?;
            let s = runner::run(&cfg, &out)?;
            print_summary(&s, &out);
            Ok(true)
        }
        Command::Sweep {
            model,
            no_continuation,
            common,
        } => {
            let mut cfg = load(common.config.as_deref(), ExperimentId::Sweep)?;
            cfg.experiment = ExperimentId::Sweep;
            if let Some(m) = model {
                cfg.model = m;
            }
            if no_continuation {
                cfg.ocp.continuation = false;
            }
            let out = apply(&mut cfg, &common)?;
            let s = runner::sweep(&cfg, &out)?;
            print_summary(&Summary::Sweep(s), &out);
            Ok(true)
        }
        Command::Verify { config } => {
            let cfg = load(config.as_deref(), ExperimentId::Sim1Bsa)?;
            let reports = verify::run_all(&cfg.params, &cfg.integrator)?;
            for r in &reports {
                println!("{r}");
            }
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Show { path } => show(&path).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
