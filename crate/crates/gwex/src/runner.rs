//! Replica orchestration. Every replica derives its randomness from the
//! master seed and its index, so results do not depend on scheduling.

use gwex_core::dynamics::{drift_path, environment_at, simulate_windowed, ExactRun, Model, TaggedTrajectory};
use gwex_core::estimators::{
    detect_regenerations, estimate_speed_batch_means, estimate_speed_endpoint,
    estimate_speed_regen_pooled, martingale_residual, Distance, RegenerationRecord, SpeedEstimate,
};
use gwex_core::measures::{canonical_ball_code, sample_law, Configuration, LawTag, RootedSample};
use gwex_core::oracle::{self, FiniteTree};
use gwex_core::stats::total_variation;
use gwex_core::stream::{replica_seed, tags};
use gwex_core::OffspringDistribution;
use rayon::prelude::*;

use crate::config::{Config, EngineName};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    Exact { budget: Option<u64> },
    Windowed { radius: u32 },
}

/// Everything needed to run one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub offspring: OffspringDistribution,
    pub law: LawTag,
    pub param: f64,
    pub engine: Engine,
    pub horizon: f64,
    pub master_seed: u64,
}

impl RunSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let engine = match cfg.engine {
            EngineName::Exact => Engine::Exact { budget: cfg.budget },
            EngineName::Windowed => Engine::Windowed { radius: cfg.window_radius.expect("validated") },
        };
        Ok(Self {
            offspring: cfg.offspring()?,
            law: cfg.law(),
            param: cfg.parameter(),
            engine,
            horizon: cfg.horizon,
            master_seed: cfg.master_seed,
        })
    }

    pub fn model(&self) -> Model {
        self.law.model()
    }

    pub fn with_engine(&self, engine: Engine) -> Self {
        Self { engine, ..self.clone() }
    }

    pub fn sample(&self, index: u64) -> Result<RootedSample> {
        Ok(sample_law(&self.offspring, self.law, self.param, replica_seed(self.master_seed, index, tags::SAMPLE))?)
    }

    pub fn dynamics_seed(&self, index: u64) -> u64 {
        replica_seed(self.master_seed, index, tags::DYNAMICS)
    }

    fn exact<'a>(&self, sample: &'a mut RootedSample, seed: u64, budget: Option<u64>) -> Result<ExactRun<'a>> {
        let run = ExactRun::new(sample, self.model(), self.horizon, seed)?;
        Ok(match budget {
            Some(b) => run.with_budget(b),
            None => run,
        })
    }

    /// Trajectory of replica `index` with the configured engine.
    pub fn trajectory(&self, index: u64) -> Result<TaggedTrajectory> {
        let mut sample = self.sample(index)?;
        self.trajectory_from(&mut sample, self.dynamics_seed(index))
    }

    pub fn trajectory_from(&self, sample: &mut RootedSample, seed: u64) -> Result<TaggedTrajectory> {
        match self.engine {
            Engine::Exact { budget } => Ok(self.exact(sample, seed, budget)?.simulate()?),
            Engine::Windowed { radius } => Ok(simulate_windowed(sample, self.model(), self.horizon, radius, seed)?),
        }
    }

    /// `M_T` of replica `index`, always on the exact engine.
    pub fn martingale_end(&self, index: u64) -> Result<f64> {
        let budget = match self.engine {
            Engine::Exact { budget } => budget,
            Engine::Windowed { .. } => None,
        };
        let mut sample = self.sample(index)?;
        let mut run = self.exact(&mut sample, self.dynamics_seed(index), budget)?;
        let traj = run.simulate()?;
        let segments = drift_path(&mut run)?;
        Ok(martingale_residual(&traj, &segments).last().expect("residual ends at the horizon").1)
    }

    /// Colored ball code around the tagged particle of replica `index` at
    /// time `t`; `t = 0` reads the initial configuration without dynamics.
    pub fn environment_code(&self, index: u64, t: f64, r: u32) -> Result<Vec<u8>> {
        let mut sample = self.sample(index)?;
        if t == 0.0 {
            let root = sample.tree.root();
            return Ok(canonical_ball_code(&mut sample.tree, Some(&sample.config), root, r)?);
        }
        let spec = RunSpec { horizon: t, ..self.clone() };
        let budget = match self.engine {
            Engine::Exact { budget } => budget,
            Engine::Windowed { .. } => None,
        };
        let mut run = spec.exact(&mut sample, self.dynamics_seed(index), budget)?;
        Ok(environment_at(&mut run, t, r)?.code)
    }
}

/// Runs `f` on `0..n` over `workers` threads (all cores when `None`) and
/// returns the results in index order.
pub fn replicate<T: Send>(n: usize, workers: Option<usize>, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build().expect("thread pool");
    pool.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

/// Worker count from `GWEX_WORKERS` when set.
pub fn env_workers() -> Option<usize> {
    std::env::var("GWEX_WORKERS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Endpoint and batch-means estimates for both distances plus the pooled
/// regeneration estimate. The regeneration entry is an error when too few
/// blocks were observed.
pub fn speed_estimates(
    trajs: &[TaggedTrajectory],
    batches: usize,
    buffer_fraction: f64,
    seed: u64,
) -> Result<(Vec<SpeedEstimate>, std::result::Result<SpeedEstimate, gwex_core::Error>)> {
    let mut out = Vec::new();
    for distance in [Distance::Graph, Distance::Horo] {
        out.push(estimate_speed_endpoint(trajs, distance)?);
        out.push(estimate_speed_batch_means(trajs, distance, batches)?);
    }
    let regen = regeneration_estimate(trajs, buffer_fraction, seed);
    Ok((out, regen))
}

pub fn regenerations(traj: &TaggedTrajectory, buffer_fraction: f64) -> RegenerationRecord {
    detect_regenerations(traj, (traj.jump_count() as f64 * buffer_fraction) as usize)
}

pub fn regeneration_estimate(
    trajs: &[TaggedTrajectory],
    buffer_fraction: f64,
    seed: u64,
) -> std::result::Result<SpeedEstimate, gwex_core::Error> {
    let records: Vec<RegenerationRecord> = trajs.iter().map(|t| regenerations(t, buffer_fraction)).collect();
    let runs: Vec<_> = trajs.iter().zip(&records).collect();
    estimate_speed_regen_pooled(&runs, replica_seed(seed, 0, tags::BOOTSTRAP))
}

/// Largest detailed-balance violation of each product law over the corpus
/// of rooted trees, as `(model, parameter, violation)`.
pub fn detailed_balance_suite(min: usize, max: usize, rhos: &[f64], alphas: &[f64]) -> Result<Vec<(Model, f64, f64)>> {
    let corpus = oracle::corpus(min, max);
    let mut out = Vec::new();
    for (model, params) in [(Model::Variable, rhos), (Model::Constant, alphas)] {
        for &p in params {
            let mut worst = 0.0f64;
            for ft in &corpus {
                let g = oracle::build_generator(ft, model)?;
                let law = match model {
                    Model::Variable => gwex_core::measures::SiteLaw::Bernoulli(p),
                    Model::Constant => gwex_core::measures::SiteLaw::Degree(p),
                };
                worst = worst.max(oracle::check_detailed_balance(&g, &oracle::product_measure(ft, law))?);
            }
            out.push((model, p, worst));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineComparison {
    pub vertices: usize,
    pub model: Model,
    /// Total variation between empirical and exact occupancy laws.
    pub tv_configuration: f64,
    /// Same for the joint law of occupancies and tagged position.
    pub tv_joint: f64,
    /// χ² goodness of fit p-value of the tagged position, when enough
    /// bins survive pooling.
    pub tagged_p_value: Option<f64>,
}

/// Runs the exact engine `samples` times on a frozen finite tree from the
/// Palm product law and compares the time-`t` law with uniformization.
pub fn engine_vs_oracle(
    ft: &FiniteTree,
    model: Model,
    param: f64,
    t: f64,
    samples: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<EngineComparison> {
    let n = ft.len();
    let (law, site_law) = match model {
        Model::Variable => (LawTag::PVariable, gwex_core::measures::SiteLaw::Bernoulli(param)),
        Model::Constant => (LawTag::PConstant, gwex_core::measures::SiteLaw::Degree(param)),
    };
    let tree = ft.to_lazy();
    let states: Vec<Result<usize>> = replicate(samples, workers, |i| {
        let seed = replica_seed(master_seed, i, tags::CONFIG);
        let config = match model {
            Model::Variable => Configuration::bernoulli(param, true, seed)?,
            Model::Constant => Configuration::degree(param, true, seed)?,
        };
        let mut sample = RootedSample::frozen(tree.clone(), config, law);
        let mut run = ExactRun::new(&mut sample, model, t, replica_seed(master_seed, i, tags::DYNAMICS))?;
        let traj = run.simulate()?;
        let x = traj.at(t).node;
        let mut eta = 0usize;
        let mut tagged = 0usize;
        let root = run.tree().root();
        let nodes: Vec<_> = run.tree().ball(root, n as u32)?.nodes;
        for v in nodes {
            let vertex = run.tree().vertex(v)? as usize;
            if run.occupancy_after(v, t)? {
                eta |= 1 << vertex;
            }
            if v == x {
                tagged = vertex;
            }
        }
        Ok(eta * n + tagged)
    });
    let g = oracle::build_tagged_generator(ft, model)?;
    let exact = oracle::transient_distribution(&g, &oracle::palm_tagged_measure(ft, site_law), t)?;
    let mut counts = vec![0u64; g.dim()];
    for s in states {
        counts[s?] += 1;
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let tv_joint = total_variation(&empirical, &exact);
    let tv_configuration = total_variation(&oracle::occupancy_marginal(&g, &empirical), &oracle::occupancy_marginal(&g, &exact));
    let observed: Vec<u64> = {
        let m = oracle::tagged_marginal(&g, &empirical);
        m.iter().map(|p| (p * samples as f64).round() as u64).collect()
    };
    let expected = oracle::tagged_marginal(&g, &exact);
    let tagged_p_value = gwex_core::stats::chi_square_gof(&observed, &expected, 5.0).ok().map(|r| r.2);
    Ok(EngineComparison { vertices: n, model, tv_configuration, tv_joint, tagged_p_value })
}
