//! Experiment configuration read from JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gwex_core::dynamics::Model;
use gwex_core::measures::LawTag;
use gwex_core::OffspringDistribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Variable,
    Constant,
}

impl From<ModelName> for Model {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Variable => Model::Variable,
            ModelName::Constant => Model::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LawName {
    P,
    #[default]
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    #[default]
    Exact,
    Windowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write `trajectories.csv`.
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("gwex-out"), trajectories: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOptions {
    pub batches: usize,
    /// End buffer for regeneration detection, as a fraction of the jumps.
    pub buffer_fraction: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { batches: 20, buffer_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationarityOptions {
    pub time: f64,
    /// Samples at each of the two times.
    pub samples: usize,
    pub min_bin: f64,
    pub threshold: f64,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        Self { time: 5.0, samples: 10_000, min_bin: 5.0, threshold: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub rhos: Vec<f64>,
    pub alphas: Vec<f64>,
    pub tolerance: f64,
    /// Largest tree for the engine-versus-uniformization comparison.
    pub engine_vertices: usize,
    pub engine_time: f64,
    pub engine_tolerance: f64,
    pub engine_rho: f64,
    pub engine_alpha: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            min_vertices: 2,
            max_vertices: 5,
            rhos: vec![0.2, 0.5, 0.8],
            alphas: vec![0.3, 1.0, 3.0],
            tolerance: 1e-12,
            engine_vertices: 4,
            engine_time: 0.5,
            engine_tolerance: 0.01,
            engine_rho: 0.5,
            engine_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Require the endpoint interval to contain the closed-form speed.
    pub theory: bool,
    pub max_half_width: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self { theory: true, max_half_width: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelName,
    /// Offspring pmf keyed by the number of children.
    pub offspring: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub law: LawName,
    #[serde(default)]
    pub engine: EngineName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<u32>,
    pub horizon: f64,
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub ball_radius: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub estimators: EstimatorOptions,
    #[serde(default)]
    pub stationarity: StationarityOptions,
    #[serde(default)]
    pub oracle: OracleOptions,
    #[serde(default)]
    pub checks: Checks,
}

fn one() -> u32 {
    1
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_owned(), source: e })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn schema(path: &str, message: impl Into<String>) -> Error {
        Error::Schema { path: path.into(), message: message.into() }
    }

    pub fn validate(&self) -> Result<()> {
        self.offspring()?;
        match (self.model, self.rho, self.alpha) {
            (ModelName::Variable, Some(r), None) if (0.0..1.0).contains(&r) => {}
            (ModelName::Variable, Some(_), None) => return Err(Self::schema("rho", "must lie in [0, 1)")),
            (ModelName::Variable, _, _) => return Err(Self::schema("rho", "the variable model takes `rho` and no `alpha`")),
            (ModelName::Constant, None, Some(a)) if a >= 0.0 && a.is_finite() => {}
            (ModelName::Constant, None, Some(_)) => return Err(Self::schema("alpha", "must be a finite non-negative number")),
            (ModelName::Constant, _, _) => return Err(Self::schema("alpha", "the constant model takes `alpha` and no `rho`")),
        }
        if self.law == LawName::Q && self.model == ModelName::Constant && self.alpha == Some(0.0) {
            return Err(Self::schema("law", "Q with alpha = 0 is undefined; use P"));
        }
        if !(self.horizon > 0.0 && self.horizon <= gwex_core::dynamics::MAX_HORIZON) {
            return Err(Self::schema("horizon", "must lie in (0, 1e6]"));
        }
        if self.replicas < 2 {
            return Err(Self::schema("replicas", "at least 2 replicas are needed"));
        }
        match (self.engine, self.window_radius) {
            (EngineName::Windowed, None) => return Err(Self::schema("window_radius", "required by the windowed engine")),
            (_, Some(r)) if r < 2 => return Err(Self::schema("window_radius", "must be at least 2")),
            _ => {}
        }
        if self.estimators.batches < 2 {
            return Err(Self::schema("estimators.batches", "at least 2 batches"));
        }
        if !(0.0..1.0).contains(&self.estimators.buffer_fraction) {
            return Err(Self::schema("estimators.buffer_fraction", "must lie in [0, 1)"));
        }
        if self.stationarity.samples < 2 || self.stationarity.time.is_nan() || self.stationarity.time <= 0.0 {
            return Err(Self::schema("stationarity", "needs positive time and at least 2 samples"));
        }
        if self.oracle.min_vertices < 1 || self.oracle.max_vertices > gwex_core::oracle::DEFAULT_CAP {
            return Err(Self::schema("oracle.max_vertices", "trees must have 1 to 12 vertices"));
        }
        Ok(())
    }

    pub fn offspring(&self) -> Result<OffspringDistribution> {
        let mut pmf = Vec::with_capacity(self.offspring.len());
        for (k, &p) in &self.offspring {
            let k: u64 = k.parse().map_err(|_| Self::schema(&format!("offspring.{k}"), "keys are child counts"))?;
            pmf.push((k, p));
        }
        OffspringDistribution::new(&pmf).map_err(|e| Self::schema("offspring", e.to_string()))
    }

    pub fn model(&self) -> Model {
        self.model.into()
    }

    pub fn law(&self) -> LawTag {
        match (self.law, self.model) {
            (LawName::P, ModelName::Variable) => LawTag::PVariable,
            (LawName::P, ModelName::Constant) => LawTag::PConstant,
            (LawName::Q, ModelName::Variable) => LawTag::QVariable,
            (LawName::Q, ModelName::Constant) => LawTag::QConstant,
        }
    }

    /// `rho` or `alpha`, whichever the model uses.
    pub fn parameter(&self) -> f64 {
        self.rho.or(self.alpha).expect("validated")
    }

    /// Closed-form speed for this configuration.
    pub fn theoretical_speed(&self) -> Result<f64> {
        let d = self.offspring()?;
        Ok(match self.model {
            ModelName::Variable => gwex_core::offspring::speed_variable(&d, self.parameter())?,
            ModelName::Constant => gwex_core::offspring::speed_constant(&d, self.parameter())?,
        })
    }

    /// Applies `GWEX_MASTER_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var("GWEX_MASTER_SEED") {
            self.master_seed =
                v.trim().parse().map_err(|_| Self::schema("GWEX_MASTER_SEED", format!("not an unsigned integer: {v}")))?;
        }
        Ok(())
    }
}
