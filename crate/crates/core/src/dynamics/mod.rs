//! Exclusion dynamics with a tagged particle.
//!
//! Both engines read the same graphical representation ([`Clocks`]): every
//! edge carries a stirring clock at rate `min(p(x,y), p(y,x))` and, when the
//! two directed rates differ, an extra directed clock from the endpoint with
//! the larger rate. Stirring swaps the two occupancies, a directed event
//! moves a particle if the target is empty. This realizes exactly the
//! exclusion generator, and because every move is a single-particle move
//! the tagged path is a function of the occupancy path.
//!
//! [`ExactRun`] resolves occupancies by walking the clocks backward in
//! time to the initial product configuration. [`simulate_windowed`] runs
//! the same clocks forward inside a ball that follows the tagged particle.

mod clock;
mod environment;
mod exact;
mod windowed;

use alloc::vec::Vec;

pub use clock::{Clocks, EdgeRates, Kind, SlabPlan, Stamp};
pub use environment::{drift_path, environment_at, environment_view, local_drift, local_drift_with, DriftSegment, EnvRecord, EnvironmentView};
pub use exact::{simulate_exact, ExactRun, DEFAULT_BUDGET};
pub use windowed::{simulate_windowed, windowed_report, WindowedReport};

use crate::error::{Error, Result};
use crate::measures::LawTag;
use crate::offspring::OffspringDistribution;
use crate::tree::NodeId;

/// Longest horizon accepted by the engines.
pub const MAX_HORIZON: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// `p(x, y) = 1` on every edge.
    Variable,
    /// `p(x, y) = 1/deg(x)`.
    Constant,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Variable => "variable",
            Model::Constant => "constant",
        }
    }

    /// Jump rate from a site of degree `deg`.
    pub fn rate(self, deg: u32) -> f64 {
        match self {
            Model::Variable => 1.0,
            Model::Constant => 1.0 / deg as f64,
        }
    }
}

/// Slab length `1/(3m)` for a horizon `t`.
pub fn slab_plan(d: &OffspringDistribution, t: f64) -> Result<SlabPlan> {
    SlabPlan::with_tau(1.0 / (3.0 * d.mean()), t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub node: NodeId,
    /// Graph distance from the starting root.
    pub distance: u32,
    /// Horodistance from the starting root.
    pub horo: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedTrajectory {
    /// Starts with the initial position at time 0.
    pub jumps: Vec<Jump>,
    pub horizon: f64,
    pub model: Model,
    pub law: LawTag,
    pub dynamics_seed: u64,
}

impl TaggedTrajectory {
    pub fn jump_count(&self) -> usize {
        self.jumps.len() - 1
    }

    /// Index of the last jump at or before `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= t).max(1) - 1
    }

    pub fn at(&self, t: f64) -> &Jump {
        &self.jumps[self.index_at(t)]
    }

    pub fn last(&self) -> &Jump {
        self.jumps.last().expect("trajectory holds its start")
    }

    /// Checks the structural invariants against the tree that produced it.
    pub fn validate(&self, tree: &crate::tree::LazyTree) -> Result<()> {
        for w in self.jumps.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("{msg} at t = {}", b.time)));
            if b.time <= a.time || b.time > self.horizon {
                return bad("jump times are not increasing");
            }
            if tree.distance(a.node, b.node)? != 1 {
                return bad("consecutive positions are not adjacent");
            }
            if a.distance.abs_diff(b.distance) != 1 || (a.horo - b.horo).abs() != 1 {
                return bad("distance changed by more than one");
            }
        }
        Ok(())
    }
}

pub(crate) fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t <= MAX_HORIZON {
        Ok(())
    } else {
        Err(Error::BadHorizon(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_arithmetic() {
        let d = OffspringDistribution::deterministic(2).unwrap();
        let p = slab_plan(&d, 1.0).unwrap();
        assert!((p.tau() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.slabs(), 6);
        assert_eq!(slab_plan(&d, 1.0 / 6.0).unwrap().slabs(), 1);
        let ring = 1.0 - libm::exp(-2.0 * p.tau());
        assert!(ring < 1.0 / d.mean());
        assert!(slab_plan(&d, 0.0).is_err());
        assert!(slab_plan(&d, 2e6).is_err());
    }

    #[test]
    fn model_rates() {
        assert_eq!(Model::Variable.rate(4), 1.0);
        assert_eq!(Model::Constant.rate(4), 0.25);
    }
}
