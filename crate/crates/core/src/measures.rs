//! Product measures on occupancies, their Palm versions, and the four
//! rooted-sample laws.
//!
//! Occupancies are keyed by node path like the tree itself, so the value
//! at a node never depends on the order in which nodes are revealed.

use alloc::vec::Vec;

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::stream::{hash2, hash3, tags, unit};
use crate::tree::{Flavor, LazyTree, NodeId};

/// Law of the occupancy at a single site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteLaw {
    /// Occupied with probability `rho`.
    Bernoulli(f64),
    /// Occupied with probability `alpha deg / (1 + alpha deg)`.
    Degree(f64),
    /// Every site occupied. Only used to build frozen test harnesses.
    Full,
}

impl SiteLaw {
    /// The law puts no particles anywhere except (under Palm) the root.
    pub fn is_empty(&self) -> bool {
        matches!(*self, SiteLaw::Bernoulli(r) | SiteLaw::Degree(r) if r == 0.0)
    }

    pub fn matches(&self, model: Model) -> bool {
        matches!(
            (self, model),
            (SiteLaw::Full, _) | (SiteLaw::Bernoulli(_), Model::Variable) | (SiteLaw::Degree(_), Model::Constant)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    law: SiteLaw,
    palm: bool,
    seed: u64,
}

impl Configuration {
    pub fn bernoulli(rho: f64, palm: bool, seed: u64) -> Result<Self> {
        check_density(rho)?;
        Ok(Self { law: SiteLaw::Bernoulli(rho), palm, seed })
    }

    pub fn degree(alpha: f64, palm: bool, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { law: SiteLaw::Degree(alpha), palm, seed })
    }

    pub fn full() -> Self {
        Self { law: SiteLaw::Full, palm: true, seed: 0 }
    }

    pub fn law(&self) -> SiteLaw {
        self.law
    }

    pub fn is_palm(&self) -> bool {
        self.palm
    }

    /// Probability that `v` is occupied, ignoring the Palm conditioning.
    pub fn marginal(&self, tree: &mut LazyTree, v: NodeId) -> Result<f64> {
        Ok(match self.law {
            SiteLaw::Bernoulli(rho) => {
                tree.key(v)?;
                rho
            }
            SiteLaw::Degree(alpha) => {
                let k = tree.degree(v)? as f64;
                alpha * k / (1.0 + alpha * k)
            }
            SiteLaw::Full => 1.0,
        })
    }

    /// Initial occupancy of `v`. Under the degree law this materializes the
    /// children of `v`.
    pub fn occupied(&self, tree: &mut LazyTree, v: NodeId) -> Result<bool> {
        let p = self.marginal(tree, v)?;
        if self.palm && v == tree.root() {
            return Ok(true);
        }
        Ok(unit(hash2(self.seed, tree.key(v)?)) < p)
    }
}

fn check_density(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::BadDensity(rho))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::BadAlpha(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LawTag {
    /// AGW tree, Bernoulli Palm configuration.
    PVariable,
    /// AGW tree, degree-law Palm configuration.
    PConstant,
    /// AGW reweighted by `1/deg(o)`, Bernoulli Palm configuration.
    QVariable,
    /// AGW reweighted by `1/(alpha deg(o) + 1)`, degree-law Palm configuration.
    QConstant,
}

impl LawTag {
    pub fn name(self) -> &'static str {
        match self {
            LawTag::PVariable => "P^v",
            LawTag::PConstant => "P^c",
            LawTag::QVariable => "Q^v",
            LawTag::QConstant => "Q^c",
        }
    }

    pub fn model(self) -> Model {
        match self {
            LawTag::PVariable | LawTag::QVariable => Model::Variable,
            LawTag::PConstant | LawTag::QConstant => Model::Constant,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RootedSample {
    pub tree: LazyTree,
    pub config: Configuration,
    pub law: LawTag,
    /// Number of AGW trees drawn before one was accepted.
    pub attempts: u32,
}

impl RootedSample {
    /// A frozen finite tree with a given configuration law, for oracle
    /// comparisons.
    pub fn frozen(tree: LazyTree, config: Configuration, law: LawTag) -> Self {
        Self { tree, config, law, attempts: 1 }
    }
}

pub fn sample_p_variable(d: &OffspringDistribution, rho: f64, seed: u64) -> Result<RootedSample> {
    check_density(rho)?;
    sample(d, seed, LawTag::PVariable, |_| 1.0, Configuration::bernoulli(rho, true, hash2(seed, tags::CONFIG))?)
}

pub fn sample_p_constant(d: &OffspringDistribution, alpha: f64, seed: u64) -> Result<RootedSample> {
    check_alpha(alpha)?;
    sample(d, seed, LawTag::PConstant, |_| 1.0, Configuration::degree(alpha, true, hash2(seed, tags::CONFIG))?)
}

/// Unimodular tree by rejection: an AGW tree is kept with probability
/// `2/deg(o)`.
pub fn sample_q_variable(d: &OffspringDistribution, rho: f64, seed: u64) -> Result<RootedSample> {
    check_density(rho)?;
    sample(d, seed, LawTag::QVariable, |k| 2.0 / k, Configuration::bernoulli(rho, true, hash2(seed, tags::CONFIG))?)
}

/// AGW tree kept with probability `(2 alpha + 1)/(alpha deg(o) + 1)`.
pub fn sample_q_constant(d: &OffspringDistribution, alpha: f64, seed: u64) -> Result<RootedSample> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::BadAlpha(alpha));
    }
    sample(
        d,
        seed,
        LawTag::QConstant,
        |k| (2.0 * alpha + 1.0) / (alpha * k + 1.0),
        Configuration::degree(alpha, true, hash2(seed, tags::CONFIG))?,
    )
}

/// Draws a sample from the law named by `law` with parameter `rho` or
/// `alpha` as appropriate.
pub fn sample_law(d: &OffspringDistribution, law: LawTag, param: f64, seed: u64) -> Result<RootedSample> {
    match law {
        LawTag::PVariable => sample_p_variable(d, param, seed),
        LawTag::PConstant => sample_p_constant(d, param, seed),
        LawTag::QVariable => sample_q_variable(d, param, seed),
        LawTag::QConstant => sample_q_constant(d, param, seed),
    }
}

fn sample(
    d: &OffspringDistribution,
    seed: u64,
    law: LawTag,
    accept: impl Fn(f64) -> f64,
    config: Configuration,
) -> Result<RootedSample> {
    let mut attempt = 0u64;
    loop {
        let mut tree = LazyTree::sample(d, Flavor::Agw, hash3(seed, tags::TREE, attempt));
        let k = tree.degree(tree.root())? as f64;
        attempt += 1;
        if unit(hash3(seed, tags::ACCEPT, attempt)) < accept(k) {
            return Ok(RootedSample { tree, config, law, attempts: attempt as u32 });
        }
    }
}

/// Canonical code of the radius-`r` ball around `center`, colored by the
/// initial occupancies when `occupancy` is given.
pub fn canonical_ball_code(
    tree: &mut LazyTree,
    occupancy: Option<&Configuration>,
    center: NodeId,
    r: u32,
) -> Result<Vec<u8>> {
    let ball = tree.ball(center, r)?;
    match occupancy {
        None => Ok(ball.code(None)),
        Some(config) => {
            let colors = ball.nodes.iter().map(|&v| config.occupied(tree, v)).collect::<Result<Vec<_>>>()?;
            Ok(ball.code(Some(&colors)))
        }
    }
}
