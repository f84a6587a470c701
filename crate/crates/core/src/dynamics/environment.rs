use alloc::vec::Vec;

use super::clock::Stamp;
use super::exact::ExactRun;
use super::Model;
use crate::error::{Error, Result};
use crate::measures::Configuration;
use crate::stream::hash_bytes;
use crate::tree::{LazyTree, NodeId};

/// Expected horodistance drift of a particle at `x` under the initial
/// configuration: every vacant neighbor contributes `⟨z - x⟩`, divided by
/// `deg(x)` in the constant speed model.
pub fn local_drift(tree: &mut LazyTree, config: &Configuration, x: NodeId, model: Model) -> Result<f64> {
    if !config.occupied(tree, x)? {
        return Err(Error::UnoccupiedSite(x.index()));
    }
    local_drift_with(tree, x, model, |tree, z| config.occupied(tree, z))
}

/// [`local_drift`] with neighbor occupancies supplied by `occupied`.
pub fn local_drift_with(
    tree: &mut LazyTree,
    x: NodeId,
    model: Model,
    mut occupied: impl FnMut(&mut LazyTree, NodeId) -> Result<bool>,
) -> Result<f64> {
    let next = tree.ray_next(x)?;
    let neighbors: Vec<NodeId> = tree.neighbors(x)?.collect();
    let mut vacant = Vec::with_capacity(neighbors.len());
    for &z in &neighbors {
        vacant.push(!occupied(tree, z)?);
    }
    Ok(drift(model, &neighbors, next, &vacant))
}

fn drift(model: Model, neighbors: &[NodeId], next: NodeId, vacant: &[bool]) -> f64 {
    let sum: f64 = neighbors
        .iter()
        .zip(vacant)
        .filter(|(_, &v)| v)
        .map(|(&z, _)| if z == next { -1.0 } else { 1.0 })
        .sum();
    match model {
        Model::Variable => sum,
        Model::Constant => sum / neighbors.len() as f64,
    }
}

/// State of the environment seen from the tagged particle just after a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvRecord {
    pub time: f64,
    pub root_degree: u32,
    pub psi: f64,
    /// Canonical colored code of the ball around the tagged particle.
    pub code: Vec<u8>,
    pub code_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentView {
    pub radius: u32,
    /// One record at time 0 and one after each jump.
    pub records: Vec<EnvRecord>,
}

/// Environment record at an arbitrary time `t`.
pub fn environment_at(run: &mut ExactRun<'_>, t: f64, r: u32) -> Result<EnvRecord> {
    let traj = run.simulate()?;
    let x = traj.at(t).node;
    let psi = drift_now(run, x, Stamp::after(t))?;
    let ball = run.tree().ball(x, r)?;
    let mut colors = Vec::with_capacity(ball.len());
    for &v in &ball.nodes {
        colors.push(run.occupancy_after(v, t)?);
    }
    let code = ball.code(Some(&colors));
    Ok(EnvRecord { time: t, root_degree: run.tree().degree(x)?, psi, code_hash: hash_bytes(&code), code })
}

/// Environment records at time 0 and just after every jump.
pub fn environment_view(run: &mut ExactRun<'_>, r: u32) -> Result<EnvironmentView> {
    let traj = run.simulate()?;
    let mut records = Vec::with_capacity(traj.jumps.len());
    for j in &traj.jumps {
        records.push(environment_at(run, j.time, r)?);
    }
    Ok(EnvironmentView { radius: r, records })
}

fn drift_now(run: &mut ExactRun<'_>, x: NodeId, at: Stamp) -> Result<f64> {
    let next = run.tree().ray_next(x)?;
    let neighbors: Vec<NodeId> = run.tree().neighbors(x)?.collect();
    let mut vacant = Vec::with_capacity(neighbors.len());
    for &z in &neighbors {
        vacant.push(!run.occupancy_at(z, at)?);
    }
    Ok(drift(run.model(), &neighbors, next, &vacant))
}

/// The drift at the tagged particle is constant on `[start, next start)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSegment {
    pub start: f64,
    pub psi: f64,
}

/// Piecewise constant drift along the whole run. The drift changes at
/// tagged jumps and at events on edges `{y, w}` with `y` a neighbor of the
/// tagged particle and `w` not the tagged particle.
pub fn drift_path(run: &mut ExactRun<'_>) -> Result<Vec<DriftSegment>> {
    let traj = run.simulate()?;
    let model = run.model();
    let mut segments = Vec::new();
    for (i, j) in traj.jumps.iter().enumerate() {
        let x = j.node;
        let start = Stamp::after(j.time);
        let end = match traj.jumps.get(i + 1) {
            Some(next) => Stamp::before(next.time),
            None => Stamp::after(traj.horizon),
        };
        let next = run.tree().ray_next(x)?;
        let neighbors: Vec<NodeId> = run.tree().neighbors(x)?.collect();
        let mut vacant = Vec::with_capacity(neighbors.len());
        // Events that can change a neighbor's occupancy, tagged with the
        // neighbor they touch.
        let mut events = Vec::new();
        for (slot, &y) in neighbors.iter().enumerate() {
            vacant.push(!run.occupancy_at(y, start)?);
            let parent = run.tree().parent(y)?;
            let children = run.tree().children(y)?;
            let edges = parent.filter(|&p| p != x).map(|_| y).into_iter().chain(children.filter(|&c| c != x));
            for child in edges {
                for (s, _) in run.edge_events(child, start, end)? {
                    events.push((s, slot));
                }
            }
        }
        events.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        let mut psi = drift(model, &neighbors, next, &vacant);
        segments.push(DriftSegment { start: j.time, psi });
        for (s, slot) in events {
            let through = Stamp { time: s.time, edge: s.edge + 1 };
            vacant[slot] = !run.occupancy_at(neighbors[slot], through)?;
            let updated = drift(model, &neighbors, next, &vacant);
            if updated != psi {
                psi = updated;
                segments.push(DriftSegment { start: s.time, psi });
            }
        }
    }
    Ok(segments)
}
