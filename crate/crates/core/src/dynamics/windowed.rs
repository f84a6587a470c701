use alloc::vec;
use alloc::vec::Vec;

use super::clock::{Clocks, EdgeRates, Kind, SlabPlan, Stamp};
use super::{slab_plan, Jump, Model, TaggedTrajectory};
use crate::error::{Error, Result};
use crate::measures::{Configuration, RootedSample, SiteLaw};
use crate::tree::{LazyTree, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedReport {
    pub trajectory: TaggedTrajectory,
    /// Clock events applied inside the window.
    pub events: u64,
    pub recenters: u64,
    /// Events after which the window held a different number of particles
    /// than before. Only counted when the check is enabled.
    pub conservation_violations: u64,
}

/// Forward simulation restricted to the ball of radius `radius` around the
/// tagged particle. Attempts across the window boundary are suppressed;
/// sites entering the window are drawn from the initial law.
pub fn simulate_windowed(
    sample: &mut RootedSample,
    model: Model,
    horizon: f64,
    radius: u32,
    seed: u64,
) -> Result<TaggedTrajectory> {
    Ok(windowed_report(sample, model, horizon, radius, seed, false)?.trajectory)
}

/// [`simulate_windowed`] with work counters and an optional particle
/// conservation check.
pub fn windowed_report(
    sample: &mut RootedSample,
    model: Model,
    horizon: f64,
    radius: u32,
    seed: u64,
    check_conservation: bool,
) -> Result<WindowedReport> {
    if radius < 2 {
        return Err(Error::BadRadius(radius));
    }
    let RootedSample { tree, config, law, .. } = sample;
    if !config.law().matches(model) || (config.law() != SiteLaw::Full && law.model() != model) {
        return Err(Error::InconsistentLaw(model.name()));
    }
    let plan = match tree.law() {
        Some(d) => slab_plan(d, horizon)?,
        None => SlabPlan::with_tau(1.0 / 6.0, horizon)?,
    };
    let clocks = Clocks::new(plan, model, seed);
    let root = tree.root();
    let mut x = root;
    let mut win = Window::default();
    let mut report = WindowedReport {
        trajectory: TaggedTrajectory {
            jumps: vec![Jump { time: 0.0, node: root, distance: 0, horo: 0 }],
            horizon,
            model,
            law: *law,
            dynamics_seed: seed,
        },
        events: 0,
        recenters: 0,
        conservation_violations: 0,
    };

    win.recenter(tree, config, model, radius, x)?;

    let mut cur = Stamp::before(0.0);
    let mut rings = Vec::new();
    let mut pending: Vec<(Stamp, u32, Kind)> = Vec::new();
    for k in 0..plan.slabs() {
        'slab: loop {
            pending.clear();
            for (slot, e) in win.edges.iter().enumerate() {
                rings.clear();
                clocks.draw(e.rates, e.key, k, &mut rings);
                for r in &rings {
                    let s = Stamp { time: r.time, edge: e.key };
                    if s > cur && r.time <= horizon {
                        pending.push((s, slot as u32, r.kind));
                    }
                }
            }
            pending.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
            for &(s, slot, kind) in &pending {
                cur = s;
                let Edge { parent: p, child: c, .. } = win.edges[slot as usize];
                let (pi, ci) = (p.index() as usize, c.index() as usize);
                let (op, oc) = (win.occ[pi], win.occ[ci]);
                let before = check_conservation.then(|| win.particles());
                let mut moved = None;
                match kind {
                    Kind::Stir => {
                        win.occ[pi] = oc;
                        win.occ[ci] = op;
                        if x == p && !oc {
                            moved = Some(c);
                        } else if x == c && !op {
                            moved = Some(p);
                        }
                    }
                    Kind::Down if op && !oc => {
                        win.occ[pi] = false;
                        win.occ[ci] = true;
                        moved = (x == p).then_some(c);
                    }
                    Kind::Up if oc && !op => {
                        win.occ[ci] = false;
                        win.occ[pi] = true;
                        moved = (x == c).then_some(p);
                    }
                    _ => {}
                }
                report.events += 1;
                if before.is_some_and(|b| b != win.particles()) {
                    report.conservation_violations += 1;
                }
                if let Some(y) = moved {
                    x = y;
                    report.trajectory.jumps.push(Jump { time: s.time, node: y, distance: tree.depth(y)?, horo: tree.horo(y)? });
                    report.recenters += 1;
                    win.recenter(tree, config, model, radius, x)?;
                    continue 'slab;
                }
            }
            break;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    parent: NodeId,
    child: NodeId,
    key: u64,
    rates: EdgeRates,
}

/// Occupancies of the current ball, indexed by node. A node belongs to the
/// window when its mark equals the current epoch.
#[derive(Debug, Default)]
struct Window {
    epoch: u32,
    mark: Vec<u32>,
    occ: Vec<bool>,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
}

impl Window {
    fn particles(&self) -> usize {
        self.nodes.iter().filter(|v| self.occ[v.index() as usize]).count()
    }

    fn recenter(&mut self, tree: &mut LazyTree, config: &Configuration, model: Model, radius: u32, x: NodeId) -> Result<()> {
        let previous = self.epoch;
        self.epoch += 1;
        self.nodes.clear();
        self.edges.clear();
        // Breadth-first over the ball, remembering where each node came from.
        let mut frontier = vec![(x, None::<NodeId>)];
        let mut next = Vec::new();
        for dist in 0..=radius {
            for &(v, from) in &frontier {
                let i = v.index() as usize;
                if self.mark.len() <= i {
                    let len = tree.materialized().max(i + 1);
                    self.mark.resize(len, 0);
                    self.occ.resize(len, false);
                }
                if self.mark[i] != previous || previous == 0 {
                    self.occ[i] = config.occupied(tree, v)?;
                }
                self.mark[i] = self.epoch;
                self.nodes.push(v);
                if let Some(u) = from {
                    let (parent, child) = if tree.parent(v)? == Some(u) { (u, v) } else { (v, u) };
                    let rates = match model {
                        Model::Variable => EdgeRates::new(model, 1, 1),
                        Model::Constant => EdgeRates::new(model, tree.degree(parent)?, tree.degree(child)?),
                    };
                    self.edges.push(Edge { parent, child, key: tree.key(child)?, rates });
                }
                if dist < radius {
                    for w in tree.neighbors(v)? {
                        if Some(w) != from {
                            next.push((w, Some(v)));
                        }
                    }
                }
            }
            core::mem::swap(&mut frontier, &mut next);
            next.clear();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate_exact;
    use crate::measures::{sample_p_constant, sample_p_variable};
    use crate::offspring::OffspringDistribution;

    fn thin() -> OffspringDistribution {
        OffspringDistribution::new(&[(1, 0.5), (2, 0.5)]).unwrap()
    }

    #[test]
    fn large_window_matches_exact() {
        for seed in 0..10 {
            let mut a = sample_p_variable(&thin(), 0.4, seed).unwrap();
            let mut b = a.clone();
            let exact = simulate_exact(&mut a, Model::Variable, 8.0, seed).unwrap();
            let win = simulate_windowed(&mut b, Model::Variable, 8.0, 24, seed).unwrap();
            let ex: Vec<_> = exact.jumps.iter().map(|j| (j.time, a.tree.path(j.node).unwrap())).collect();
            let wi: Vec<_> = win.jumps.iter().map(|j| (j.time, b.tree.path(j.node).unwrap())).collect();
            assert_eq!(ex, wi);
        }
        for seed in 0..10 {
            let mut a = sample_p_constant(&thin(), 0.8, seed).unwrap();
            let mut b = a.clone();
            let exact = simulate_exact(&mut a, Model::Constant, 8.0, seed).unwrap();
            let win = simulate_windowed(&mut b, Model::Constant, 8.0, 24, seed).unwrap();
            assert_eq!(exact.jumps.len(), win.jumps.len());
            for (e, w) in exact.jumps.iter().zip(&win.jumps) {
                assert_eq!(e.time, w.time);
                assert_eq!(a.tree.path(e.node).unwrap(), b.tree.path(w.node).unwrap());
            }
        }
    }

    #[test]
    fn small_window_walker_moves() {
        let d = OffspringDistribution::deterministic(2).unwrap();
        let mut s = sample_p_variable(&d, 0.0, 5).unwrap();
        let t = simulate_windowed(&mut s, Model::Variable, 10.0, 2, 5).unwrap();
        assert!(t.jump_count() > 5);
        t.validate(&s.tree).unwrap();
        assert_eq!(simulate_windowed(&mut s, Model::Variable, 10.0, 1, 5), Err(Error::BadRadius(1)));
    }

    #[test]
    fn window_conserves_particles() {
        let mut s = sample_p_variable(&thin(), 0.5, 2).unwrap();
        let r = windowed_report(&mut s, Model::Variable, 5.0, 4, 2, true).unwrap();
        assert!(r.events > 50);
        assert_eq!(r.conservation_violations, 0);
    }
}
