//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use bsa_core::experiments::{sim2_horizons, Bounds, Settings, Sim3Config, SIM1_HORIZON, SIM1_MODES, SIM2_SPEED};
use bsa_core::friction::{ClutchSchedule, FrictionParams};
use bsa_core::hybrid::BsaMode;
use bsa_core::nlp::SolverOptions;
use bsa_core::ocp::{CollocationKind, OcpModel, DEFAULT_INTERVALS};
use bsa_core::sim::IntegratorConfig;
use bsa_core::PendulumParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Sim1Bsa,
    Sim1Vsa,
    Sim2Bsa,
    Sim2Vsa,
    Sim3Friction,
    Sweep,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Sim1Bsa => "sim1-bsa",
            ExperimentId::Sim1Vsa => "sim1-vsa",
            ExperimentId::Sim2Bsa => "sim2-bsa",
            ExperimentId::Sim2Vsa => "sim2-vsa",
            ExperimentId::Sim3Friction => "sim3-friction",
            ExperimentId::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcpSection {
    pub modes: Vec<BsaMode>,
    pub intervals: usize,
    pub collocation: CollocationKind,
    pub degree: usize,
    /// Prescribed final speed of the effort problems [m/s].
    pub speed: f64,
    /// Horizons of a sweep [s].
    pub horizons: Vec<f64>,
    /// Warm-start each sweep horizon from the previous one (sequential).
    pub continuation: bool,
}

impl Default for OcpSection {
    fn default() -> Self {
        Self {
            modes: SIM1_MODES.to_vec(),
            intervals: DEFAULT_INTERVALS,
            collocation: CollocationKind::Legendre,
            degree: 3,
            speed: SIM2_SPEED,
            horizons: sim2_horizons(),
            continuation: true,
        }
    }
}

/// Friction replay: ramped clutch commands issued `advance` before each
/// ideal switch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClutchSection {
    pub m_max: f64,
    pub t_connect: f64,
    pub t_separate: f64,
    pub advance: f64,
    pub friction: FrictionParams,
    /// Explicit commands replacing the ones derived from the switching times.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ClutchSchedule>,
}

impl Default for ClutchSection {
    fn default() -> Self {
        let r = Sim3Config::default();
        Self {
            m_max: r.m_max,
            t_connect: r.t_connect,
            t_separate: r.t_separate,
            advance: r.advance,
            friction: r.friction,
            schedule: None,
        }
    }
}

impl ClutchSection {
    pub fn replay(&self) -> Sim3Config {
        Sim3Config {
            m_max: self.m_max,
            t_connect: self.t_connect,
            t_separate: self.t_separate,
            advance: self.advance,
            friction: self.friction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    /// Model of a sweep.
    #[serde(default = "default_model")]
    pub model: OcpModel,
    /// Horizon `t_f` of a single run [s]; defaults per experiment.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// First seed of the multistart; seeds `seed .. seed + starts` are used.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: PendulumParams,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub ocp: OcpSection,
    #[serde(default)]
    pub solver_options: SolverOptions,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub clutch: ClutchSection,
}

fn default_model() -> OcpModel {
    OcpModel::Bsa
}
fn default_seed() -> u64 {
    1
}
fn default_starts() -> usize {
    8
}
fn default_solver() -> String {
    "ipm".into()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error(transparent)]
    Core(#[from] bsa_core::Error),
}

fn field(name: &str, reason: &str) -> ConfigError {
    ConfigError::Field {
        field: name.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Defaults of `experiment`.
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            model: default_model(),
            horizon: None,
            seed: default_seed(),
            starts: default_starts(),
            solver: default_solver(),
            output: None,
            params: PendulumParams::default(),
            bounds: Bounds::default(),
            ocp: OcpSection::default(),
            solver_options: SolverOptions::default(),
            integrator: IntegratorConfig::default(),
            clutch: ClutchSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.into(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                &format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.params.validate()?;
        self.integrator.validate()?;
        self.clutch.friction.validate()?;
        if let Some(s) = &self.clutch.schedule {
            s.validate()?;
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(name, "must be positive and finite"))
            }
        };
        if let Some(h) = self.horizon {
            positive("horizon", h)?;
        }
        positive("bounds.motor_velocity", self.bounds.motor_velocity)?;
        positive("bounds.stiffness_rate", self.bounds.stiffness_rate)?;
        let (lo, hi) = self.bounds.stiffness;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(field("bounds.stiffness", "need 0 ≤ lower < upper"));
        }
        positive("ocp.speed", self.ocp.speed)?;
        positive("clutch.m_max", self.clutch.m_max)?;
        positive("clutch.t_connect", self.clutch.t_connect)?;
        positive("clutch.t_separate", self.clutch.t_separate)?;
        if !(self.clutch.advance >= 0.0) {
            return Err(field("clutch.advance", "must be nonnegative"));
        }
        if self.ocp.modes.is_empty() {
            return Err(field("ocp.modes", "need at least one mode"));
        }
        if self.ocp.intervals == 0 {
            return Err(field("ocp.intervals", "must be at least 1"));
        }
        if self.starts == 0 {
            return Err(field("starts", "must be at least 1"));
        }
        if self.ocp.horizons.is_empty() {
            return Err(field("ocp.horizons", "need at least one horizon"));
        }
        for h in &self.ocp.horizons {
            positive("ocp.horizons", *h)?;
        }
        if self.experiment == ExperimentId::Sim3Friction && self.ocp.modes.len() < 2 {
            return Err(field("ocp.modes", "the friction replay needs a mode switch"));
        }
        Ok(())
    }

    /// Horizon of a single run.
    pub fn run_horizon(&self) -> f64 {
        self.horizon.unwrap_or(match self.experiment {
            ExperimentId::Sim2Bsa | ExperimentId::Sim2Vsa => 1.0,
            _ => SIM1_HORIZON,
        })
    }

    pub fn settings(&self) -> Settings {
        Settings {
            params: self.params,
            modes: self.ocp.modes.clone(),
            bounds: self.bounds,
            intervals: self.ocp.intervals,
            collocation: self.ocp.collocation,
            degree: self.ocp.degree,
            seeds: (self.seed..self.seed + self.starts as u64).collect(),
            solver: self.solver_options,
            integrator: self.integrator,
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse("schema_version = 1\nexperiment = \"sim1-bsa\"\n").unwrap();
        assert_eq!(c, ExperimentConfig::new(ExperimentId::Sim1Bsa));
        assert_eq!(c.run_horizon(), 0.2);
        assert_eq!(c.settings().seeds, (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse("schema_version = 1\nexperiment = \"sim1-bsa\"\nfoo = 1\n").unwrap_err();
        assert!(e.to_string().contains("foo"), "{e}");
        let e =
            ExperimentConfig::parse("schema_version = 1\nexperiment = \"sim1-bsa\"\n[params]\nmass = 1\n").unwrap_err();
        assert!(e.to_string().contains("mass"), "{e}");
    }

    #[test]
    fn field_errors_name_the_field() {
        let e = ExperimentConfig::parse("schema_version = 1\nexperiment = \"sim1-bsa\"\n[params]\nm1 = -1.0\n")
            .unwrap_err();
        assert!(e.to_string().contains("m1"), "{e}");
        let e = ExperimentConfig::parse("schema_version = 2\nexperiment = \"sim1-bsa\"\n").unwrap_err();
        assert!(e.to_string().contains("schema_version"), "{e}");
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = ExperimentConfig::new(ExperimentId::Sweep);
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn clutch_schedule_and_modes_parse() {
        let text = r#"
schema_version = 1
experiment = "sim3-friction"
[ocp]
modes = ["SEA-DEC", "DEC-SEA"]
[clutch]
m_max = 40.0
advance = 0.005
[clutch.friction]
mu_d = 1.0
mu_s = 1.2
radius = 0.05
min_dwell = 1e-4
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.clutch.m_max, 40.0);
        assert_eq!(c.clutch.friction.mu_s, 1.2);
    }
}
