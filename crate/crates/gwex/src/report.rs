//! Result records and the files written for every command.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use gwex_core::dynamics::TaggedTrajectory;
use gwex_core::estimators::SpeedEstimate;
use gwex_core::stream::hash_bytes;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub model: String,
    pub offspring: String,
    pub parameter: f64,
    pub law: String,
    pub engine: String,
    pub estimator: String,
    pub distance: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub theory: Option<f64>,
    pub contains_theory: Option<bool>,
}

impl EstimateRow {
    pub fn new(cfg: &Config, e: &SpeedEstimate, theory: Option<f64>) -> Self {
        let offspring = cfg.offspring.iter().map(|(k, p)| format!("{k}:{p}")).collect::<Vec<_>>().join(" ");
        Self {
            model: cfg.model().name().into(),
            offspring,
            parameter: cfg.parameter(),
            law: cfg.law().name().into(),
            engine: match cfg.engine {
                crate::config::EngineName::Exact => "exact".into(),
                crate::config::EngineName::Windowed => format!("windowed(R={})", cfg.window_radius.unwrap_or(0)),
            },
            estimator: e.method.name().into(),
            distance: e.distance.name().into(),
            point: e.point,
            lower: e.lower,
            upper: e.upper,
            level: e.level,
            std_error: e.std_error,
            replicas: e.replicas,
            horizon: e.horizon,
            theory,
            contains_theory: theory.map(|v| e.contains(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckRow {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub replica: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub artifact: String,
    pub config: Config,
    pub theoretical_speed: Option<f64>,
    pub estimates: Vec<EstimateRow>,
    pub checks: Vec<CheckRow>,
    pub failures: usize,
    pub passed: bool,
}

impl ResultRecord {
    pub fn new(command: &str, cfg: &Config) -> Self {
        Self {
            command: command.into(),
            artifact: artifact_version(cfg),
            config: cfg.clone(),
            theoretical_speed: None,
            estimates: Vec::new(),
            checks: Vec::new(),
            failures: 0,
            passed: false,
        }
    }

    pub fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

/// Crate version plus a short hash of the canonical config.
pub fn artifact_version(cfg: &Config) -> String {
    let h = hash_bytes(serde_json::to_string(cfg).expect("config serializes").as_bytes());
    format!("{}+{:012x}", env!("CARGO_PKG_VERSION"), h >> 16)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_owned(), source }
}

pub fn write_reports(
    dir: &Path,
    record: &ResultRecord,
    failures: &[Failure],
    trajectories: Option<&[(u64, TaggedTrajectory)]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join("results.json");
    let mut f = File::create(&path).map_err(io(&path))?;
    serde_json::to_writer_pretty(&mut f, record).map_err(|e| Error::Io { path: path.clone(), source: e.into() })?;
    writeln!(f).map_err(io(&path))?;

    let path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &record.estimates {
        w.serialize(row)?;
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join("failures.json");
    let f = File::create(&path).map_err(io(&path))?;
    serde_json::to_writer_pretty(f, failures).map_err(|e| Error::Io { path: path.clone(), source: e.into() })?;

    if let Some(trajs) = trajectories {
        let path = dir.join("trajectories.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["replica", "time", "node_depth", "graph_distance", "horodistance"])?;
        for (replica, t) in trajs {
            for j in &t.jumps {
                w.write_record(&[
                    replica.to_string(),
                    j.time.to_string(),
                    j.distance.to_string(),
                    j.distance.to_string(),
                    j.horo.to_string(),
                ])?;
            }
        }
        w.flush().map_err(io(&path))?;
    }
    Ok(())
}
