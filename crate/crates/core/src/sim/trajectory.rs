//! Sampled trajectories, event logs and their exports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::friction::{ClutchId, FrictionMode};
use crate::hybrid::BsaMode;
use crate::power::{work_summary, PowerSample, WorkSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bsa,
    Vsa,
    Friction,
}

impl ModelKind {
    /// Offsets of `q` and `q̇` in the flat state vector.
    pub fn link_offsets(self) -> (usize, usize) {
        match self {
            ModelKind::Bsa | ModelKind::Friction => (4, 8),
            ModelKind::Vsa => (4, 6),
        }
    }

    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Bsa | ModelKind::Friction => &[
                "theta1", "theta2", "psi1", "psi2", "q1", "q2", "psi1_dot", "psi2_dot", "q1_dot", "q2_dot",
            ],
            ModelKind::Vsa => &["theta1", "theta2", "k1", "k2", "q1", "q2", "q1_dot", "q2_dot"],
        }
    }

    pub fn input_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Vsa => &["u_theta1", "u_theta2", "u_k1", "u_k2"],
            _ => &["u_theta1", "u_theta2"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Bsa(BsaMode),
    Friction(FrictionMode),
    Smooth,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeLabel::Bsa(m) => write!(f, "{m}"),
            ModeLabel::Friction(m) => write!(f, "{m}"),
            ModeLabel::Smooth => write!(f, "-"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// State after any event at `t`.
    pub x: Vec<f64>,
    /// Input `u(t⁺)`.
    pub u: Vec<f64>,
    pub mode: ModeLabel,
    pub energy: EnergyBreakdown,
    /// Power flow just before `t` (differs from `power` across input
    /// switches and impulses).
    pub power_left: PowerSample,
    pub power: PowerSample,
    pub v_tcp: f64,
    /// Accumulated actuator work per joint since the start [J].
    pub work: [f64; 2],
    /// Accumulated loss in impacts and slipping clutches [J].
    pub dissipated: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    ScheduledSwitch,
    Impulse,
    Stick,
    Slip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub before: ModeLabel,
    pub after: ModeLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clutch: Option<ClutchId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: ModelKind,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

/// Compact description of a trajectory for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub model: ModelKind,
    pub t_final: f64,
    pub final_v_tcp: f64,
    pub peak_v_tcp: f64,
    pub final_energy: EnergyBreakdown,
    /// Largest spring potential per joint [J].
    pub peak_spring_potential: [f64; 2],
    pub work: WorkSummary,
    pub dissipated: f64,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            samples: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Result<&Sample> {
        self.samples.last().ok_or(Error::EmptyTrajectory)
    }

    pub fn final_v_tcp(&self) -> Result<f64> {
        Ok(self.last()?.v_tcp)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Link angles and rates of sample `i`.
    pub fn link_state(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let (oq, oqd) = self.model.link_offsets();
        let x = &self.samples[i].x;
        ([x[oq], x[oq + 1]], [x[oqd], x[oqd + 1]])
    }

    /// Pushes a sample, replacing the previous one if it has the same time.
    pub(crate) fn push(&mut self, s: Sample) {
        if let Some(last) = self.samples.last_mut() {
            if last.t == s.t {
                let left = last.power_left;
                *last = s;
                last.power_left = left;
                return;
            }
        }
        self.samples.push(s);
    }

    pub fn work_summary(&self) -> Result<WorkSummary> {
        let pairs: Vec<_> = self.samples.iter().map(|s| (s.power_left, s.power)).collect();
        work_summary(&pairs)
    }

    /// Index of the largest value of `f` over the samples.
    pub fn argmax_by<F: Fn(&Sample) -> f64>(&self, f: F) -> Option<usize> {
        self.samples
            .iter()
            .enumerate()
            .max_by(|a, b| f(a.1).total_cmp(&f(b.1)))
            .map(|(i, _)| i)
    }

    pub fn summary(&self) -> Result<TrajectorySummary> {
        let last = self.last()?;
        let peak = |j: usize| {
            self.samples
                .iter()
                .map(|s| s.energy.potential_spring[j])
                .fold(0.0, f64::max)
        };
        Ok(TrajectorySummary {
            model: self.model,
            t_final: last.t,
            final_v_tcp: last.v_tcp,
            peak_v_tcp: self.samples.iter().map(|s| s.v_tcp).fold(0.0, f64::max),
            final_energy: last.energy,
            peak_spring_potential: [peak(0), peak(1)],
            work: self.work_summary()?,
            dissipated: last.dissipated,
            events: self.events.clone(),
        })
    }

    /// Header of [`Trajectory::write_csv`].
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t", "mode"];
        cols.extend(self.model.state_names());
        cols.extend(self.model.input_names());
        cols.extend([
            "v_tcp",
            "E_kin",
            "E_pot",
            "E_pot_gravity",
            "E_spring_1",
            "E_spring_2",
            "E_total",
            "W_1",
            "W_2",
            "E_dissipated",
        ]);
        cols.join(",")
    }

    /// One row per sample with the columns of [`Trajectory::csv_header`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for s in &self.samples {
            let mut row = vec![format!("{:.9}", s.t), s.mode.to_string()];
            row.extend(s.x.iter().chain(&s.u).map(|v| format!("{v:.9e}")));
            let e = &s.energy;
            row.extend(
                [
                    s.v_tcp,
                    e.kinetic(),
                    e.potential(),
                    e.potential_gravity,
                    e.potential_spring[0],
                    e.potential_spring[1],
                    e.total(),
                    s.work[0],
                    s.work[1],
                    s.dissipated,
                ]
                .iter()
                .map(|v| format!("{v:.9e}")),
            );
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Power trace; samples with a jump in power appear twice (left and
    /// right limits at the same time).
    pub fn write_power_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", PowerSample::CSV_HEADER)?;
        for s in &self.samples {
            if s.power_left != s.power {
                writeln!(w, "{}", s.power_left.csv_row())?;
            }
            writeln!(w, "{}", s.power.csv_row())?;
        }
        Ok(())
    }
}
