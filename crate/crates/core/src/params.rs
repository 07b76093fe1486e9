//! Physical constants of the elastic double pendulum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical parameters of the two-link pendulum and its joint springs.
///
/// Defaults are the published prototype values. The centre-of-mass offsets
/// default to half the link length and the fixed spring stiffness of the
/// clutch-switched joints to 100 N·m/rad.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    /// Link masses [kg].
    pub m1: f64,
    pub m2: f64,
    /// Link lengths [m].
    pub l1: f64,
    pub l2: f64,
    /// Joint-to-centre-of-mass distances [m].
    pub lc1: f64,
    pub lc2: f64,
    /// Link inertias about their centres of mass [kg·m²].
    pub jl1: f64,
    pub jl2: f64,
    /// Spring output inertias [kg·m²].
    pub js1: f64,
    pub js2: f64,
    /// Fixed joint spring stiffness [N·m/rad].
    pub k1: f64,
    pub k2: f64,
    /// Gravitational acceleration [m/s²].
    pub g: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m1: 5.0,
            m2: 4.6,
            l1: 0.34,
            l2: 0.34,
            lc1: 0.17,
            lc2: 0.17,
            jl1: 0.0453,
            jl2: 0.0492,
            js1: 0.001,
            js2: 0.001,
            k1: 100.0,
            k2: 100.0,
            g: 9.81,
        }
    }
}

/// Partial parameter set as it appears in configuration files; missing keys
/// keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub lc1: Option<f64>,
    pub lc2: Option<f64>,
    pub jl1: Option<f64>,
    pub jl2: Option<f64>,
    pub js1: Option<f64>,
    pub js2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub g: Option<f64>,
}

impl ParamOverrides {
    /// Applies the overrides on top of `base` and validates the result.
    ///
    /// When a length is overridden without its centre-of-mass offset, the
    /// offset follows the new length (`lc = l / 2`).
    pub fn apply(&self, base: &PendulumParams) -> Result<PendulumParams> {
        let mut p = *base;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(m1, m2, l1, l2, jl1, jl2, js1, js2, k1, k2, g);
        p.lc1 = self.lc1.unwrap_or(if self.l1.is_some() { p.l1 / 2.0 } else { p.lc1 });
        p.lc2 = self.lc2.unwrap_or(if self.l2.is_some() { p.l2 / 2.0 } else { p.lc2 });
        p.validate()?;
        Ok(p)
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("jl1", self.jl1),
            ("jl2", self.jl2),
            ("js1", self.js1),
            ("js2", self.js2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("g", self.g),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        for (name, v) in &all[..10] {
            if *v <= 0.0 {
                return Err(invalid(name, format!("must be strictly positive, got {v}")));
            }
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("g", self.g)] {
            if v < 0.0 {
                return Err(invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        if self.lc1 > self.l1 {
            return Err(invalid("lc1", "centre of mass must lie on the link (lc1 <= l1)"));
        }
        if self.lc2 > self.l2 {
            return Err(invalid("lc2", "centre of mass must lie on the link (lc2 <= l2)"));
        }
        Ok(())
    }

    /// Parses a `key = value` parameter file (SI units). Unknown keys are
    /// rejected; missing keys keep their default values.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let overrides: ParamOverrides = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        overrides.apply(&Self::default())
    }

    /// Stiffness pair of the fixed joint springs.
    pub fn stiffness(&self) -> [f64; 2] {
        [self.k1, self.k2]
    }

    pub fn spring_inertia(&self) -> [f64; 2] {
        [self.js1, self.js2]
    }

    pub fn with_stiffness(mut self, k: [f64; 2]) -> Self {
        self.k1 = k[0];
        self.k2 = k[1];
        self
    }

    pub fn with_spring_inertia(mut self, js: f64) -> Self {
        self.js1 = js;
        self.js2 = js;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = PendulumParams::default();
        p.validate().unwrap();
        assert_eq!(p.js1, 0.001);
        assert_eq!(p.l1 + p.l2, 0.68);
    }

    #[test]
    fn parses_key_value_overrides() {
        let p = PendulumParams::from_config_str("m1 = 6.0\nl2 = 0.4\n# comment\n").unwrap();
        assert_eq!(p.m1, 6.0);
        assert_eq!(p.l2, 0.4);
        assert_eq!(p.lc2, 0.2);
        assert_eq!(p.m2, 4.6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            PendulumParams::from_config_str("mass = 1.0"),
            Err(Error::Config(_))
        ));
        match PendulumParams::from_config_str("m1 = -1.0") {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "m1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(PendulumParams::from_config_str("lc1 = 0.5").is_err());
        assert!(PendulumParams::from_config_str("js2 = 0.0").is_err());
    }
}
