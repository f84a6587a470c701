use alloc::vec::Vec;
use core::cmp::Ordering;

use hashbrown::HashMap;

use super::{check_horizon, Model};
use crate::error::{Error, Result};
use crate::stream::{hash3, Stream};
use crate::tree::{LazyTree, NodeId};

/// Time axis cut into slabs of equal length. Clock events of an edge in a
/// slab are a pure function of `(seed, edge, slab)`, which gives random
/// access to the clocks in both time directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabPlan {
    tau: f64,
    horizon: f64,
    slabs: u32,
}

impl SlabPlan {
    pub fn with_tau(tau: f64, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("slab length {tau}")));
        }
        let slabs = libm::ceil(horizon / tau - 1e-9).max(1.0);
        if slabs > u32::MAX as f64 {
            return Err(Error::InvalidArgument(alloc::format!("{slabs} slabs")));
        }
        Ok(Self { tau, horizon, slabs: slabs as u32 })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn slabs(&self) -> u32 {
        self.slabs
    }

    pub fn slab_of(&self, t: f64) -> u32 {
        let k = libm::floor(t.max(0.0) / self.tau);
        (k as u32).min(self.slabs - 1)
    }
}

/// Position of an event in the global order: time first, then edge key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamp {
    pub time: f64,
    pub edge: u64,
}

impl Stamp {
    /// Sorts before every event at time `t`.
    pub fn before(t: f64) -> Self {
        Self { time: t, edge: 0 }
    }

    /// Sorts after every event at time `t`.
    pub fn after(t: f64) -> Self {
        Self { time: t, edge: u64::MAX }
    }
}

impl PartialOrd for Stamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.time.partial_cmp(&other.time)? {
            Ordering::Equal => Some(self.edge.cmp(&other.edge)),
            o => Some(o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// Exchange the occupancies of the two endpoints.
    Stir,
    /// Parent to child attempt.
    Down,
    /// Child to parent attempt.
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRates {
    pub stir: f64,
    pub down: f64,
    pub up: f64,
}

impl EdgeRates {
    pub fn new(model: Model, deg_parent: u32, deg_child: u32) -> Self {
        let down = model.rate(deg_parent);
        let up = model.rate(deg_child);
        let stir = down.min(up);
        Self { stir, down: down - stir, up: up - stir }
    }

    pub fn total(&self) -> f64 {
        self.stir + self.down + self.up
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub time: f64,
    pub kind: Kind,
}

/// Lazily generated, cached clock events. An edge is named by its lower
/// endpoint.
#[derive(Debug, Clone)]
pub struct Clocks {
    plan: SlabPlan,
    model: Model,
    seed: u64,
    rings: Vec<Ring>,
    index: HashMap<(u32, u32), (u32, u32)>,
    rates: HashMap<u32, EdgeRates>,
}

impl Clocks {
    pub fn new(plan: SlabPlan, model: Model, seed: u64) -> Self {
        Self { plan, model, seed, rings: Vec::new(), index: HashMap::new(), rates: HashMap::new() }
    }

    pub fn plan(&self) -> &SlabPlan {
        &self.plan
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn rates(&mut self, tree: &mut LazyTree, child: NodeId) -> Result<EdgeRates> {
        if let Some(r) = self.rates.get(&child.index()) {
            return Ok(*r);
        }
        let parent = tree
            .parent(child)?
            .ok_or_else(|| Error::InvalidArgument("the root has no parent edge".into()))?;
        let rates = match self.model {
            Model::Variable => EdgeRates::new(Model::Variable, 1, 1),
            Model::Constant => EdgeRates::new(Model::Constant, tree.degree(parent)?, tree.degree(child)?),
        };
        self.rates.insert(child.index(), rates);
        Ok(rates)
    }

    /// Sorted events of the edge above `child` in slab `k`. Events past the
    /// horizon are included; callers filter them.
    pub fn slab(&mut self, tree: &mut LazyTree, child: NodeId, k: u32) -> Result<&[Ring]> {
        let (start, len) = match self.index.get(&(child.index(), k)) {
            Some(&span) => span,
            None => {
                let rates = self.rates(tree, child)?;
                let start = self.rings.len();
                let mut rings = core::mem::take(&mut self.rings);
                self.draw(rates, tree.key(child)?, k, &mut rings);
                self.rings = rings;
                let span = (start as u32, (self.rings.len() - start) as u32);
                self.index.insert((child.index(), k), span);
                span
            }
        };
        Ok(&self.rings[start as usize..(start + len) as usize])
    }

    /// Appends the events of slab `k` on the edge with key `key` to `out`
    /// without caching them. Agrees with [`Clocks::slab`].
    pub fn draw(&self, rates: EdgeRates, key: u64, k: u32, out: &mut Vec<Ring>) {
        let total = rates.total();
        let start = out.len();
        let mut s = Stream::new(hash3(self.seed, key, k as u64));
        let n = s.poisson(total * self.plan.tau);
        let t0 = k as f64 * self.plan.tau;
        for _ in 0..n {
            let time = t0 + self.plan.tau * s.uniform();
            let u = s.uniform() * total;
            let kind = if u < rates.stir {
                Kind::Stir
            } else if u < rates.stir + rates.down {
                Kind::Down
            } else {
                Kind::Up
            };
            out.push(Ring { time, kind });
        }
        out[start..].sort_unstable_by(|a, b| a.time.total_cmp(&b.time));
    }

    /// Events on the edge above `child` strictly between two stamps.
    pub fn between(&mut self, tree: &mut LazyTree, child: NodeId, from: Stamp, to: Stamp) -> Result<Vec<(Stamp, Kind)>> {
        let key = tree.key(child)?;
        let mut out = Vec::new();
        let last = self.plan.slab_of(to.time);
        let horizon = self.plan.horizon;
        for k in self.plan.slab_of(from.time)..=last {
            for r in self.slab(tree, child, k)? {
                let s = Stamp { time: r.time, edge: key };
                if s > from && s < to && r.time <= horizon {
                    out.push((s, r.kind));
                }
            }
        }
        Ok(out)
    }

    /// Number of cached slab entries, a proxy for work done.
    pub fn cached(&self) -> usize {
        self.index.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::OffspringDistribution;
    use crate::tree::Flavor;

    #[test]
    fn constant_rates_split() {
        let r = EdgeRates::new(Model::Constant, 2, 4);
        assert_eq!(r.stir, 0.25);
        assert_eq!(r.down, 0.25);
        assert_eq!(r.up, 0.0);
        let r = EdgeRates::new(Model::Constant, 3, 3);
        assert_eq!((r.down, r.up), (0.0, 0.0));
        let r = EdgeRates::new(Model::Variable, 7, 2);
        assert_eq!((r.stir, r.total()), (1.0, 1.0));
    }

    #[test]
    fn stamp_order() {
        let a = Stamp { time: 1.0, edge: 5 };
        assert!(Stamp::before(1.0) < a && a < Stamp::after(1.0));
        assert!(Stamp { time: 1.0, edge: 4 } < a);
    }

    #[test]
    fn replay_and_rate() {
        let d = OffspringDistribution::deterministic(2).unwrap();
        let mut tree = LazyTree::sample(&d, Flavor::Agw, 1);
        let c = tree.children(tree.root()).unwrap().get(0).unwrap();
        let plan = SlabPlan::with_tau(1.0 / 6.0, 3000.0).unwrap();
        let mut a = Clocks::new(plan, Model::Variable, 9);
        let mut b = Clocks::new(plan, Model::Variable, 9);
        let mut n = 0usize;
        for k in (0..plan.slabs()).rev() {
            let ra = a.slab(&mut tree, c, k).unwrap().to_vec();
            assert_eq!(ra, b.slab(&mut tree, c, k).unwrap());
            assert!(ra.windows(2).all(|w| w[0].time <= w[1].time));
            n += ra.len();
        }
        // Rate-1 Poisson stream over 3000 time units.
        assert!((n as f64 - 3000.0).abs() < 4.0 * libm::sqrt(3000.0), "{n}");
        let mid = a.between(&mut tree, c, Stamp::before(10.0), Stamp::after(20.0)).unwrap();
        assert!(mid.iter().all(|(s, _)| s.time >= 10.0 && s.time <= 20.0));
    }
}
