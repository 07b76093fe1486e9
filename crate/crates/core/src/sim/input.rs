//! Piecewise-constant input signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-order-hold signal: `values[i]` is applied on `[times[i], times[i+1])`
/// and the last value is held indefinitely. Before `times[0]` the first
/// value applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSchedule {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl InputSchedule {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidSchedule(
                "input schedule needs one value per breakpoint".into(),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidSchedule("input values differ in dimension".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSchedule(
                "input breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().flatten().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite input schedule entry".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(u: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![u],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Right-continuous value `u(t⁺)`.
    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[self.segment(t)]
    }

    /// Left limit `u(t⁻)`.
    pub fn value_left(&self, t: f64) -> &[f64] {
        let i = self.times.partition_point(|&s| s < t).saturating_sub(1);
        &self.values[i]
    }

    /// Breakpoints strictly inside `(a, b)`.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> Vec<f64> {
        self.times.iter().copied().filter(|&t| t > a && t < b).collect()
    }

    /// Signal with every breakpoint shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t + dt).collect(),
            values: self.values.clone(),
        }
    }

    /// Signal with every value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.iter().map(|x| x * s).collect()).collect(),
        }
    }
}
