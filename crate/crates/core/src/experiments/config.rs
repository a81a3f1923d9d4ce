use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::corruption::{AdversaryStrategy, CorruptionBudget};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::kernels::MonteCarloConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    #[serde(alias = "A")]
    A,
    #[serde(alias = "B")]
    B,
    Checkerboard,
    Stripes,
    /// Measures read from `mu` and `nu` files.
    Custom,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::A => "a",
            Setting::B => "b",
            Setting::Checkerboard => "checkerboard",
            Setting::Stripes => "stripes",
            Setting::Custom => "custom",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "checkerboard" => Ok(Setting::Checkerboard),
            "stripes" => Ok(Setting::Stripes),
            "custom" => Ok(Setting::Custom),
            _ => Err(Error::InvalidParameter(format!(
                "unknown setting {s:?}; expected a, b, checkerboard, stripes or custom"
            ))),
        }
    }
}

/// An estimator with optional hyperparameter overrides. Written either as a
/// bare name or as `{ name = "...", params = { key = value } }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr")]
pub struct EstimatorSpec {
    pub name: EstimatorKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl TryFrom<SpecRepr> for EstimatorSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        let (name, params) = match r {
            SpecRepr::Name(n) => (n, BTreeMap::new()),
            SpecRepr::Full { name, params } => (name, params),
        };
        let spec = EstimatorSpec {
            name: name.parse()?,
            params,
        };
        spec.config(1.0)?;
        Ok(spec)
    }
}

impl EstimatorSpec {
    pub fn new(name: EstimatorKind) -> Self {
        EstimatorSpec {
            name,
            params: BTreeMap::new(),
        }
    }

    /// Name used in result rows: the estimator name, followed by its
    /// overrides in brackets when there are any.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            return self.name.to_string();
        }
        let parts: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        format!("{}[{}]", self.name, parts.join(";"))
    }

    /// Estimator configuration for exponent `p` with the overrides applied.
    pub fn config(&self, p: f64) -> Result<EstimatorConfig> {
        let mut cfg = EstimatorConfig::with_p(p);
        cfg.apply_overrides(&self.params)?;
        Ok(cfg)
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(EstimatorSpec::new(s.parse()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(rename = "B")]
    pub resamples: usize,
    pub quantiles: Vec<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            quantiles: vec![0.1, 0.9],
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(d) => vec![d],
        OneOrMany::Many(v) => v,
    })
}

fn adversary_by_name<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<AdversaryStrategy, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Full(AdversaryStrategy),
    }
    match Repr::deserialize(de)? {
        Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        Repr::Full(a) => Ok(a),
    }
}

/// One experiment: a ground-truth setting, a grid of sample sizes, a list of
/// estimators and K seeded repetitions of every cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    /// Dimensions to run. Ignored by the planar settings (checkerboard,
    /// stripes) and by custom measures, whose dimension is read from file.
    #[serde(deserialize_with = "one_or_many")]
    pub d: Vec<usize>,
    /// Support size of the ground-truth measures.
    #[serde(rename = "N")]
    pub n_atoms: usize,
    pub n_grid: Vec<usize>,
    #[serde(rename = "K")]
    pub iterations: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub p: f64,
    pub budget: Option<CorruptionBudget>,
    #[serde(deserialize_with = "adversary_by_name")]
    pub adversary: AdversaryStrategy,
    pub master_seed: u64,
    pub bootstrap: BootstrapConfig,
    pub mc: MonteCarloConfig,
    /// Checkerboard cells per side.
    pub cells: usize,
    /// Grid points of the striped instance.
    pub grid_points: usize,
    /// Stripe width of the striped instance.
    pub delta: f64,
    pub mu: Option<PathBuf>,
    pub nu: Option<PathBuf>,
    /// Add a `wall_time_ms` metric. Off by default since it makes output
    /// differ between runs.
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            setting: Setting::A,
            d: vec![3],
            n_atoms: 2000,
            n_grid: vec![10, 25, 50, 100],
            iterations: 100,
            estimators: vec![
                EstimatorSpec::new(EstimatorKind::Nn),
                EstimatorSpec::new(EstimatorKind::RoundingCubic),
            ],
            p: 1.0,
            budget: None,
            adversary: AdversaryStrategy::Composite {
                outliers: Default::default(),
                direction: None,
            },
            master_seed: 0,
            bootstrap: BootstrapConfig::default(),
            mc: MonteCarloConfig::default(),
            cells: 4,
            grid_points: 200,
            delta: 0.05,
            mu: None,
            nu: None,
            wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load TOML, or JSON when the extension is `.json`. Relative measure
    /// paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let mut cfg = if json {
            ExperimentConfig::from_json_str(&text)?
        } else {
            ExperimentConfig::from_toml_str(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.mu, &mut cfg.nu].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        crate::ot::check_exponent(self.p)?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.iterations == 0 {
            return bad("K must be at least 1".into());
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be a nonempty list of positive sizes".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators configured".into());
        }
        if self.d.is_empty() || self.d.contains(&0) {
            return bad("d must list positive dimensions".into());
        }
        let mut labels: Vec<String> = self.estimators.iter().map(EstimatorSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("estimators are listed twice with identical parameters".into());
        }
        for e in &self.estimators {
            e.config(self.p)?;
        }
        if let Some(b) = &self.budget {
            b.validate()?;
        }
        if self.bootstrap.resamples == 0 || self.bootstrap.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("bootstrap needs B ≥ 1 and quantiles in [0, 1]".into());
        }
        let max_n = *self.n_grid.iter().max().unwrap();
        match self.setting {
            Setting::A | Setting::B | Setting::Checkerboard if max_n > self.n_atoms => {
                return bad(format!("sample size {max_n} exceeds N = {}", self.n_atoms));
            }
            Setting::A if self.d.iter().any(|&d| d < 2) => return bad("setting A needs d ≥ 2".into()),
            Setting::Stripes if max_n > self.grid_points => {
                return bad(format!("sample size {max_n} exceeds grid_points = {}", self.grid_points));
            }
            Setting::Custom if self.mu.is_none() || self.nu.is_none() => {
                return bad("custom setting needs mu and nu files".into());
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            setting = "A"
            d = [3, 5]
            N = 500
            K = 4
            n_grid = [10, 20]
            estimators = ["nn", { name = "entropic", params = { tau = 0.1 } }]
            adversary = "shift"
            budget = { eps = 0.1, rho = 0.05 }
            bootstrap = { B = 50 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.setting, Setting::A);
        assert_eq!(cfg.d, vec![3, 5]);
        assert_eq!(cfg.estimators[1].label(), "entropic[tau:0.1]");
        assert_eq!(cfg.bootstrap.quantiles, vec![0.1, 0.9]);
        assert_eq!(cfg.budget.unwrap().p, 1.0);
        assert_eq!(cfg.adversary.name(), "shift");
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&json).unwrap(), cfg);
        let single = ExperimentConfig::from_toml_str("d = 4\nK = 1").unwrap();
        assert_eq!(single.d, vec![4]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "unknown = 1",
            "K = 0",
            "n_grid = [3000]",
            "estimators = [\"knn\"]",
            "estimators = [{ name = \"entropic\", params = { bogus = 1.0 } }]",
            "estimators = [\"nn\", \"nn\"]",
            "setting = \"custom\"",
            "p = 0.5",
            "budget = { eps = 2.0, rho = 0.0 }",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
