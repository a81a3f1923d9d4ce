use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by all estimators. Unset values fall back to the
/// defaults from the known convergence rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub p: f64,
    /// Entropic regularization for the entropic estimator.
    pub tau: Option<f64>,
    /// Cube side r for the cubic rounding estimator.
    pub side: Option<f64>,
    /// Covering scale δ for the shell rounding estimator.
    pub delta: Option<f64>,
    /// Allowed suboptimality of the preliminary plan (rounding estimators).
    pub accuracy: Option<f64>,
    /// Gaussian smoothing width (robust estimator).
    pub sigma: Option<f64>,
    /// Number of smoothed draws (robust estimator), n² by default.
    pub m: Option<usize>,
    /// Allowed suboptimality of the robust estimator's plan.
    pub tau_acc: Option<f64>,
    pub eps: f64,
    pub rho: f64,
    /// Supports up to this size are solved exactly; larger ones go through
    /// Sinkhorn plus feasibility rounding.
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            p: 1.0,
            tau: None,
            side: None,
            delta: None,
            accuracy: None,
            sigma: None,
            m: None,
            tau_acc: None,
            eps: 0.0,
            rho: 0.0,
            exact_limit: 2000,
            seed: 0,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{key} must be positive, got {v}")))
    }
}

fn count(key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidParameter(format!("{key} must be a nonnegative integer, got {v}")))
    }
}

impl EstimatorConfig {
    pub fn with_p(p: f64) -> Self {
        EstimatorConfig {
            p,
            ..Default::default()
        }
    }

    /// Set one hyperparameter by name; unknown names are rejected.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "p" => {
                crate::ot::check_exponent(value)?;
                self.p = value;
            }
            "tau" => self.tau = Some(positive(key, value)?),
            "side" | "r" => self.side = Some(positive(key, value)?),
            "delta" => self.delta = Some(positive(key, value)?),
            "accuracy" => self.accuracy = Some(positive(key, value)?),
            "sigma" => self.sigma = Some(positive(key, value)?),
            "m" => self.m = Some(count(key, value)?.max(1)),
            "tau_acc" => self.tau_acc = Some(positive(key, value)?),
            "eps" if (0.0..=1.0).contains(&value) => self.eps = value,
            "rho" if value >= 0.0 && value.is_finite() => self.rho = value,
            "eps" | "rho" => {
                return Err(Error::InvalidParameter(format!("{key} out of range: {value}")))
            }
            "exact_limit" => self.exact_limit = count(key, value)?,
            "seed" => self.seed = count(key, value)? as u64,
            _ => return Err(Error::InvalidParameter(format!("unknown estimator parameter {key:?}"))),
        }
        Ok(())
    }

    /// Parse a `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse value in {pair:?}")))?;
        self.set(key.trim(), value)
    }

    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, f64>) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, *v)?;
        }
        Ok(())
    }
}

/// Estimator names accepted by the CLI and experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorKind {
    Entropic,
    RoundingCubic,
    RoundingShell,
    Nn,
    Cdf1d,
    RobustConv,
    Null,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Entropic,
        EstimatorKind::RoundingCubic,
        EstimatorKind::RoundingShell,
        EstimatorKind::Nn,
        EstimatorKind::Cdf1d,
        EstimatorKind::RobustConv,
        EstimatorKind::Null,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Entropic => "entropic",
            EstimatorKind::RoundingCubic => "rounding-cubic",
            EstimatorKind::RoundingShell => "rounding-shell",
            EstimatorKind::Nn => "nn",
            EstimatorKind::Cdf1d => "cdf1d",
            EstimatorKind::RobustConv => "robust-conv",
            EstimatorKind::Null => "null",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidParameter(format!("unknown estimator {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> Self {
        k.name().to_string()
    }
}
