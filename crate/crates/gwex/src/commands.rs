//! The four batch commands. Each returns a [`ResultRecord`] whose `passed`
//! flag drives the exit status, and writes its report files.

use std::path::Path;

use gwex_core::dynamics::{Model, TaggedTrajectory};
use gwex_core::estimators::{estimate_speed_batch_means, estimate_speed_endpoint, stationarity_test, Distance, Method};
use gwex_core::oracle;
use gwex_core::stats::mean_se;

use crate::config::{Config, EngineName};
use crate::error::{Error, Result};
use crate::report::{write_reports, CheckRow, EstimateRow, Failure, ResultRecord};
use crate::runner::{
    detailed_balance_suite, engine_vs_oracle, regeneration_estimate, regenerations, replicate, speed_estimates, Engine,
    RunSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Speed,
    Validate,
    Oracle,
    Stationarity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Speed => "speed",
            Command::Validate => "validate",
            Command::Oracle => "oracle",
            Command::Stationarity => "stationarity",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "speed" => Command::Speed,
            "validate" => Command::Validate,
            "oracle" => Command::Oracle,
            "stationarity" => Command::Stationarity,
            _ => return Err(Error::Usage(format!("unknown command `{s}`"))),
        })
    }
}

/// Runs `command` and writes its reports under `cfg.output.dir`.
pub fn run(command: Command, cfg: &Config, workers: Option<usize>) -> Result<ResultRecord> {
    let mut failures = Vec::new();
    let mut trajectories = None;
    let record = match command {
        Command::Speed => {
            let (record, trajs) = speed(cfg, workers, &mut failures)?;
            trajectories = cfg.output.trajectories.then_some(trajs);
            record
        }
        Command::Validate => validate(cfg, workers, &mut failures)?,
        Command::Oracle => oracle_suite(cfg, workers)?,
        Command::Stationarity => stationarity(cfg, workers, &mut failures)?,
    };
    write_reports(&cfg.output.dir, &record, &failures, trajectories.as_deref())?;
    Ok(record)
}

fn collect(outcomes: Vec<Result<TaggedTrajectory>>, failures: &mut Vec<Failure>) -> Vec<(u64, TaggedTrajectory)> {
    let mut ok = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(t) => ok.push((i as u64, t)),
            Err(e) => failures.push(Failure { replica: i as u64, error: e.to_string() }),
        }
    }
    ok
}

fn speed(
    cfg: &Config,
    workers: Option<usize>,
    failures: &mut Vec<Failure>,
) -> Result<(ResultRecord, Vec<(u64, TaggedTrajectory)>)> {
    let spec = RunSpec::from_config(cfg)?;
    let theory = cfg.theoretical_speed()?;
    let runs = collect(replicate(cfg.replicas, workers, |i| spec.trajectory(i)), failures);
    let trajs: Vec<TaggedTrajectory> = runs.iter().map(|(_, t)| t.clone()).collect();
    let mut record = ResultRecord::new("speed", cfg);
    record.theoretical_speed = Some(theory);
    record.failures = failures.len();
    let (estimates, regen) = speed_estimates(&trajs, cfg.estimators.batches, cfg.estimators.buffer_fraction, cfg.master_seed)?;
    for e in &estimates {
        record.estimates.push(EstimateRow::new(cfg, e, Some(theory)));
    }
    match &regen {
        Ok(e) => record.estimates.push(EstimateRow::new(cfg, e, Some(theory))),
        Err(e) => record.checks.push(CheckRow::new("regeneration", true, format!("skipped: {e}"))),
    }
    let endpoint = estimates
        .iter()
        .find(|e| e.method == Method::Endpoint && e.distance == Distance::Graph)
        .expect("endpoint estimate present");
    if cfg.checks.theory {
        record.checks.push(CheckRow::new(
            "theory",
            endpoint.contains(theory),
            format!("endpoint [{:.4}, {:.4}] vs {theory:.4}", endpoint.lower, endpoint.upper),
        ));
    }
    if let Some(w) = cfg.checks.max_half_width {
        record.checks.push(CheckRow::new(
            "half_width",
            endpoint.half_width() <= w,
            format!("{:.4} <= {w}", endpoint.half_width()),
        ));
    }
    record.checks.push(CheckRow::new("replicas", failures.is_empty(), format!("{} failed", failures.len())));
    Ok((record.finish(), runs))
}

fn validate(cfg: &Config, workers: Option<usize>, failures: &mut Vec<Failure>) -> Result<ResultRecord> {
    let spec = RunSpec::from_config(cfg)?;
    let mut record = ResultRecord::new("validate", cfg);

    let ends: Vec<f64> = replicate(cfg.replicas, workers, |i| spec.martingale_end(i))
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map_err(|e| failures.push(Failure { replica: i as u64, error: e.to_string() })).ok())
        .collect();
    let (m, se) = mean_se(&ends);
    record.checks.push(CheckRow::new("martingale", m.abs() <= 3.0 * se, format!("mean M_T = {m:.4}, se = {se:.4}")));

    let runs = collect(replicate(cfg.replicas, workers, |i| spec.trajectory(i)), failures);
    let trajs: Vec<TaggedTrajectory> = runs.into_iter().map(|(_, t)| t).collect();
    let counts: Vec<f64> =
        trajs.iter().map(|t| regenerations(t, cfg.estimators.buffer_fraction).indices.len() as f64 / cfg.horizon).collect();
    let (rate, rate_se) = mean_se(&counts);
    record.checks.push(CheckRow::new("regeneration_rate", rate > 0.0, format!("{rate:.4} ± {rate_se:.4} per unit time")));

    let endpoint = estimate_speed_endpoint(&trajs, Distance::Horo)?;
    let batch = estimate_speed_batch_means(&trajs, Distance::Horo, cfg.estimators.batches)?;
    let mut consistent = endpoint.overlaps(&batch);
    record.estimates.push(EstimateRow::new(cfg, &endpoint, None));
    record.estimates.push(EstimateRow::new(cfg, &batch, None));
    if let Ok(regen) = regeneration_estimate(&trajs, cfg.estimators.buffer_fraction, cfg.master_seed) {
        consistent &= regen.overlaps(&endpoint) && regen.overlaps(&batch);
        record.estimates.push(EstimateRow::new(cfg, &regen, None));
    }
    record.checks.push(CheckRow::new("estimator_consistency", consistent, "pairwise interval overlap"));

    let other = match cfg.engine {
        EngineName::Exact => Engine::Windowed { radius: cfg.window_radius.unwrap_or(8) },
        EngineName::Windowed => Engine::Exact { budget: cfg.budget },
    };
    let other_spec = spec.with_engine(other);
    let other_runs = collect(replicate(cfg.replicas, workers, |i| other_spec.trajectory(i)), failures);
    let other_trajs: Vec<TaggedTrajectory> = other_runs.into_iter().map(|(_, t)| t).collect();
    let cross = estimate_speed_endpoint(&other_trajs, Distance::Horo)?;
    record.checks.push(CheckRow::new(
        "cross_engine",
        cross.overlaps(&endpoint),
        format!("{other:?}: {:.4} vs {:.4}", cross.point, endpoint.point),
    ));
    record.failures = failures.len();
    record.checks.push(CheckRow::new("replicas", failures.is_empty(), format!("{} failed", failures.len())));
    Ok(record.finish())
}

fn oracle_suite(cfg: &Config, workers: Option<usize>) -> Result<ResultRecord> {
    let o = &cfg.oracle;
    let mut record = ResultRecord::new("oracle", cfg);
    for (model, p, worst) in detailed_balance_suite(o.min_vertices, o.max_vertices, &o.rhos, &o.alphas)? {
        record.checks.push(CheckRow::new(
            &format!("detailed_balance_{}_{p}", model.name()),
            worst <= o.tolerance,
            format!("max violation {worst:.3e}"),
        ));
    }
    for ft in oracle::corpus(o.min_vertices.max(2), o.engine_vertices) {
        for (model, p) in [(Model::Variable, o.engine_rho), (Model::Constant, o.engine_alpha)] {
            let c = engine_vs_oracle(&ft, model, p, o.engine_time, cfg.replicas, cfg.master_seed, workers)?;
            let code = String::from_utf8_lossy(&ft.code()).into_owned();
            record.checks.push(CheckRow::new(
                &format!("engine_{}_{code}", model.name()),
                c.tv_configuration <= o.engine_tolerance,
                format!("tv {:.4}, joint tv {:.4}, tagged p {:?}", c.tv_configuration, c.tv_joint, c.tagged_p_value),
            ));
        }
    }
    Ok(record.finish())
}

fn stationarity(cfg: &Config, workers: Option<usize>, failures: &mut Vec<Failure>) -> Result<ResultRecord> {
    let spec = RunSpec::from_config(cfg)?;
    let s = &cfg.stationarity;
    let n = s.samples;
    let mut codes = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (slot, (offset, t)) in [(0, 0.0), (n as u64, s.time)].into_iter().enumerate() {
        for (i, r) in replicate(n, workers, |i| spec.environment_code(offset + i, t, cfg.ball_radius)).into_iter().enumerate() {
            match r {
                Ok(c) => codes[slot].push(c),
                Err(e) => failures.push(Failure { replica: offset + i as u64, error: e.to_string() }),
            }
        }
    }
    let h = stationarity_test(&codes[0], &codes[1], s.min_bin)?;
    let mut record = ResultRecord::new("stationarity", cfg);
    record.failures = failures.len();
    record.checks.push(CheckRow::new(
        "stationarity",
        h.p_value > s.threshold,
        format!("chi2 = {:.2}, dof = {}, p = {:.4}", h.statistic, h.dof, h.p_value),
    ));
    record.checks.push(CheckRow::new("replicas", failures.is_empty(), format!("{} failed", failures.len())));
    Ok(record.finish())
}

/// Loads a config, applies environment overrides and an optional output
/// directory, then runs `command`.
pub fn run_file(command: Command, path: &Path, out: Option<&Path>, seed: Option<u64>, workers: Option<usize>) -> Result<ResultRecord> {
    let mut cfg = Config::load(path)?;
    cfg.apply_env()?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = out {
        cfg.output.dir = out.to_owned();
    }
    run(command, &cfg, workers)
}
