//! Statistics over tagged trajectories: speed estimates, regeneration
//! blocks, the drift martingale and a homogeneity test on environment codes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::dynamics::{DriftSegment, TaggedTrajectory};
use crate::error::{Error, Result};
use crate::stats::{chi_square_sf, mean_se, normal_critical};
use crate::stream::Stream;

pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_BATCHES: usize = 20;
pub const DEFAULT_RESAMPLES: usize = 2000;
pub const MIN_BLOCKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Endpoint,
    BatchMeans,
    Regeneration,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Endpoint => "endpoint",
            Method::BatchMeans => "batch-means",
            Method::Regeneration => "regeneration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Graph,
    Horo,
}

impl Distance {
    pub fn name(self) -> &'static str {
        match self {
            Distance::Graph => "graph",
            Distance::Horo => "horodistance",
        }
    }

    fn of(self, traj: &TaggedTrajectory, t: f64) -> f64 {
        let j = traj.at(t);
        match self {
            Distance::Graph => j.distance as f64,
            Distance::Horo => j.horo as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub std_error: f64,
    pub method: Method,
    pub distance: Distance,
    pub replicas: usize,
    pub horizon: f64,
}

impl SpeedEstimate {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }

    pub fn overlaps(&self, other: &SpeedEstimate) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

fn common_horizon(trajs: &[TaggedTrajectory]) -> Result<f64> {
    if trajs.len() < 2 {
        return Err(Error::TooFewReplicas { needed: 2, got: trajs.len() });
    }
    let h = trajs[0].horizon;
    if trajs.iter().any(|t| t.horizon != h) {
        return Err(Error::InvalidArgument("trajectories have different horizons".into()));
    }
    Ok(h)
}

fn normal_interval(xs: &[f64], level: f64) -> (f64, f64, f64, f64) {
    let (m, se) = mean_se(xs);
    let z = normal_critical(level);
    (m, m - z * se, m + z * se, se)
}

/// Mean of `distance(X_T) / T` across replicas with a normal interval.
pub fn estimate_speed_endpoint(trajs: &[TaggedTrajectory], distance: Distance) -> Result<SpeedEstimate> {
    let horizon = common_horizon(trajs)?;
    let xs: Vec<f64> = trajs.iter().map(|t| distance.of(t, horizon) / horizon).collect();
    let (point, lower, upper, std_error) = normal_interval(&xs, DEFAULT_LEVEL);
    Ok(SpeedEstimate {
        point,
        lower,
        upper,
        level: DEFAULT_LEVEL,
        std_error,
        method: Method::Endpoint,
        distance,
        replicas: trajs.len(),
        horizon,
    })
}

/// Cuts every trajectory into `batches` equal time windows and treats the
/// window speeds of all replicas as one sample.
pub fn estimate_speed_batch_means(trajs: &[TaggedTrajectory], distance: Distance, batches: usize) -> Result<SpeedEstimate> {
    if trajs.is_empty() {
        return Err(Error::TooFewReplicas { needed: 1, got: 0 });
    }
    if batches < 2 {
        return Err(Error::InvalidArgument(alloc::format!("{batches} batches")));
    }
    let horizon = trajs[0].horizon;
    if trajs.iter().any(|t| t.horizon != horizon) {
        return Err(Error::InvalidArgument("trajectories have different horizons".into()));
    }
    let width = horizon / batches as f64;
    let mut xs = Vec::with_capacity(trajs.len() * batches);
    for t in trajs {
        let mut prev = 0.0;
        for b in 1..=batches {
            let at = if b == batches { horizon } else { width * b as f64 };
            let d = distance.of(t, at);
            xs.push((d - prev) / width);
            prev = d;
        }
    }
    let (point, lower, upper, std_error) = normal_interval(&xs, DEFAULT_LEVEL);
    Ok(SpeedEstimate {
        point,
        lower,
        upper,
        level: DEFAULT_LEVEL,
        std_error,
        method: Method::BatchMeans,
        distance,
        replicas: trajs.len(),
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegenerationRecord {
    /// Jump-chain indices `n` whose step `x_n -> x_{n+1}` is a regeneration.
    pub indices: Vec<usize>,
    /// Duration of each complete block between consecutive regenerations.
    pub block_times: Vec<f64>,
    /// Horodistance gained over each complete block.
    pub block_horo: Vec<i64>,
}

impl RegenerationRecord {
    pub fn blocks(&self) -> usize {
        self.block_times.len()
    }
}

/// Default end buffer: a tenth of the jumps.
pub fn default_buffer(traj: &TaggedTrajectory) -> usize {
    traj.jump_count() / 10
}

/// Steps `n` where `x_{n+1}` was never visited before and `x_n` is never
/// visited again. Steps within `buffer` jumps of the end are dropped.
pub fn detect_regenerations(traj: &TaggedTrajectory, buffer: usize) -> RegenerationRecord {
    let xs = &traj.jumps;
    let mut first = HashMap::new();
    let mut last = HashMap::new();
    for (i, j) in xs.iter().enumerate() {
        first.entry(j.node).or_insert(i);
        last.insert(j.node, i);
    }
    let steps = xs.len().saturating_sub(1);
    let indices: Vec<usize> = (0..steps.saturating_sub(buffer))
        .filter(|&n| first[&xs[n + 1].node] == n + 1 && last[&xs[n].node] == n)
        .collect();
    let mut rec = RegenerationRecord { indices, ..Default::default() };
    for w in rec.indices.windows(2) {
        let (a, b) = (&xs[w[0] + 1], &xs[w[1] + 1]);
        rec.block_times.push(b.time - a.time);
        rec.block_horo.push(b.horo - a.horo);
    }
    rec
}

/// Ratio of horodistance to time over complete regeneration blocks with a
/// percentile bootstrap interval over blocks.
pub fn estimate_speed_regen(traj: &TaggedTrajectory, record: &RegenerationRecord, seed: u64) -> Result<SpeedEstimate> {
    estimate_speed_regen_pooled(&[(traj, record)], seed)
}

/// [`estimate_speed_regen`] over the blocks of several replicas.
pub fn estimate_speed_regen_pooled(runs: &[(&TaggedTrajectory, &RegenerationRecord)], seed: u64) -> Result<SpeedEstimate> {
    let blocks: Vec<(f64, f64)> = runs
        .iter()
        .flat_map(|(_, r)| r.block_times.iter().zip(&r.block_horo).map(|(&t, &h)| (t, h as f64)))
        .collect();
    if blocks.len() < MIN_BLOCKS {
        return Err(Error::TooFewBlocks { needed: MIN_BLOCKS, got: blocks.len() });
    }
    let ratio = |it: &mut dyn Iterator<Item = (f64, f64)>| {
        let (t, h) = it.fold((0.0, 0.0), |(t, h), (bt, bh)| (t + bt, h + bh));
        h / t
    };
    let point = ratio(&mut blocks.iter().copied());
    let mut s = Stream::new(seed);
    let mut boot: Vec<f64> = (0..DEFAULT_RESAMPLES)
        .map(|_| ratio(&mut (0..blocks.len()).map(|_| blocks[s.below(blocks.len())])))
        .collect();
    boot.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - DEFAULT_LEVEL) / 2.0;
    let pick = |q: f64| boot[((q * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    let (_, v) = crate::stats::mean_var(&boot);
    let horizon = runs.iter().map(|(t, _)| t.horizon).fold(0.0, f64::max);
    Ok(SpeedEstimate {
        point,
        lower: pick(tail).min(point),
        upper: pick(1.0 - tail).max(point),
        level: DEFAULT_LEVEL,
        std_error: libm::sqrt(v),
        method: Method::Regeneration,
        distance: Distance::Horo,
        replicas: runs.len(),
        horizon,
    })
}

/// `M_t = ⟨X_t⟩ - ∫_0^t ψ ds` just after every jump and at the horizon.
pub fn martingale_residual(traj: &TaggedTrajectory, segments: &[DriftSegment]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(traj.jumps.len() + 1);
    let mut integral = 0.0;
    let mut clock = 0.0;
    let mut seg = 0;
    let mut advance = |to: f64| {
        while seg + 1 < segments.len() && segments[seg + 1].start <= to {
            integral += segments[seg].psi * (segments[seg + 1].start - clock);
            clock = segments[seg + 1].start;
            seg += 1;
        }
        integral += segments.get(seg).map_or(0.0, |s| s.psi) * (to - clock);
        clock = to;
        integral
    };
    for j in &traj.jumps {
        out.push((j.time, j.horo as f64 - advance(j.time)));
    }
    out.push((traj.horizon, traj.last().horo as f64 - advance(traj.horizon)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homogeneity {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins left after pooling.
    pub bins: usize,
}

/// χ² homogeneity test between two samples of codes. Categories whose
/// expected count in either sample is below `min_bin` are pooled.
pub fn stationarity_test<T: Ord>(codes0: &[T], codes_t: &[T], min_bin: f64) -> Result<Homogeneity> {
    let mut counts: BTreeMap<&T, (f64, f64)> = BTreeMap::new();
    for c in codes0 {
        counts.entry(c).or_default().0 += 1.0;
    }
    for c in codes_t {
        counts.entry(c).or_default().1 += 1.0;
    }
    let (n0, n1) = (codes0.len() as f64, codes_t.len() as f64);
    let n = n0 + n1;
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::DegenerateBins { bins: counts.len() });
    }
    let small = n0.min(n1) / n;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for &(a, b) in counts.values() {
        if (a + b) * small < min_bin {
            pooled.0 += a;
            pooled.1 += b;
        } else {
            bins.push((a, b));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        if (pooled.0 + pooled.1) * small >= min_bin || bins.is_empty() {
            bins.push(pooled);
        } else {
            let i = (0..bins.len()).min_by(|&i, &j| (bins[i].0 + bins[i].1).total_cmp(&(bins[j].0 + bins[j].1))).unwrap();
            bins[i].0 += pooled.0;
            bins[i].1 += pooled.1;
        }
    }
    if bins.len() < 2 {
        return Err(Error::DegenerateBins { bins: bins.len() });
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(a, b)| {
            let col = a + b;
            let (e0, e1) = (col * n0 / n, col * n1 / n);
            (a - e0) * (a - e0) / e0 + (b - e1) * (b - e1) / e1
        })
        .sum();
    let dof = bins.len() - 1;
    Ok(Homogeneity { statistic, dof, p_value: chi_square_sf(statistic, dof), bins: bins.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Jump, Model};
    use crate::measures::LawTag;
    use crate::tree::NodeId;
    use alloc::vec;
    use proptest::prelude::*;

    /// Path through node labels `nodes` with jumps at `times` (the first is 0).
    fn synthetic(nodes: &[u32], times: &[f64], horos: &[i64], horizon: f64) -> TaggedTrajectory {
        let jumps = nodes
            .iter()
            .zip(times)
            .zip(horos)
            .map(|((&n, &time), &horo)| Jump { time, node: NodeId::from_index(n), distance: horo.unsigned_abs() as u32, horo })
            .collect();
        TaggedTrajectory { jumps, horizon, model: Model::Variable, law: LawTag::QVariable, dynamics_seed: 0 }
    }

    fn outward(steps: usize, speed: f64) -> TaggedTrajectory {
        let nodes: Vec<u32> = (0..=steps as u32).collect();
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 / speed).collect();
        let horos: Vec<i64> = (0..=steps as i64).collect();
        synthetic(&nodes, &times, &horos, steps as f64 / speed + 0.5 / speed)
    }

    #[test]
    fn exact_linear_paths() {
        let trajs = [outward(100, 2.0), outward(100, 2.0)];
        let e = estimate_speed_endpoint(&trajs, Distance::Horo).unwrap();
        assert!((e.point - 100.0 / 50.25).abs() < 1e-12);
        assert_eq!(e.lower, e.upper);
        assert_eq!(estimate_speed_endpoint(&trajs[..1], Distance::Graph), Err(Error::TooFewReplicas { needed: 2, got: 1 }));
        let b = estimate_speed_batch_means(&trajs, Distance::Graph, 20).unwrap();
        assert!((b.point - e.point).abs() < 1e-12);
    }

    #[test]
    fn outward_path_regenerates_everywhere() {
        let t = outward(50, 1.0);
        let r = detect_regenerations(&t, 5);
        assert_eq!(r.indices, (0..45).collect::<Vec<_>>());
        let e = estimate_speed_regen(&t, &r, 1).unwrap();
        assert_eq!((e.point, e.lower, e.upper), (1.0, 1.0, 1.0));
        let short = detect_regenerations(&outward(8, 1.0), 0);
        assert_eq!(estimate_speed_regen(&outward(8, 1.0), &short, 1), Err(Error::TooFewBlocks { needed: 10, got: 7 }));
    }

    #[test]
    fn backtrack_is_not_a_regeneration() {
        // o -> a -> o -> b -> ...
        let t = synthetic(&[0, 1, 0, 2, 3, 4], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0, 1, 0, 1, 2, 3], 6.0);
        let r = detect_regenerations(&t, 0);
        assert!(!r.indices.contains(&0));
        assert!(!r.indices.contains(&1));
        assert_eq!(r.indices, vec![2, 3, 4]);
    }

    #[test]
    fn prepended_excursion_keeps_blocks() {
        let base = outward(40, 1.0);
        let mut nodes = vec![0, 1000, 0];
        let mut times = vec![0.0, 0.3, 0.6];
        let mut horos = vec![0, -1, 0];
        for j in &base.jumps[1..] {
            nodes.push(j.node.index());
            times.push(j.time + 0.6);
            horos.push(j.horo);
        }
        let shifted = synthetic(&nodes, &times, &horos, base.horizon + 0.6);
        let (a, b) = (detect_regenerations(&base, 4), detect_regenerations(&shifted, 4));
        let (ea, eb) = (estimate_speed_regen(&base, &a, 3).unwrap(), estimate_speed_regen(&shifted, &b, 3).unwrap());
        assert!((ea.point - eb.point).abs() < 1e-12);
    }

    #[test]
    fn martingale_of_frozen_particle() {
        let t = synthetic(&[0], &[0.0], &[0], 5.0);
        let m = martingale_residual(&t, &[DriftSegment { start: 0.0, psi: 0.0 }]);
        assert_eq!(m, vec![(0.0, 0.0), (5.0, 0.0)]);
    }

    #[test]
    fn martingale_integrates_segments() {
        let t = synthetic(&[0, 1], &[0.0, 2.0], &[0, 1], 4.0);
        let segs = [
            DriftSegment { start: 0.0, psi: 1.0 },
            DriftSegment { start: 1.0, psi: -1.0 },
            DriftSegment { start: 2.0, psi: 2.0 },
            DriftSegment { start: 3.0, psi: 0.5 },
        ];
        let m = martingale_residual(&t, &segs);
        assert_eq!(m, vec![(0.0, 0.0), (2.0, 1.0), (4.0, 1.0 - 2.5)]);
    }

    #[test]
    fn homogeneity_extremes() {
        let a: Vec<u32> = (0..1000).map(|i| i % 7).collect();
        let h = stationarity_test(&a, &a, 5.0).unwrap();
        assert_eq!(h.statistic, 0.0);
        assert_eq!(h.p_value, 1.0);
        let x: Vec<u32> = (0..10_000).map(|i| i % 3).collect();
        let y: Vec<u32> = (0..10_000).map(|i| 10 + i % 3).collect();
        assert!(stationarity_test(&x, &y, 5.0).unwrap().p_value < 1e-10);
        assert_eq!(stationarity_test(&[1u8; 10], &[1u8; 10], 5.0), Err(Error::DegenerateBins { bins: 1 }));
    }

    #[test]
    fn rare_categories_are_pooled() {
        let mut a: Vec<u32> = (0..500).map(|i| i % 2).collect();
        let mut b = a.clone();
        a.extend(100..103);
        b.extend(200..202);
        let h = stationarity_test(&a, &b, 5.0).unwrap();
        assert_eq!(h.bins, 2);
    }

    proptest! {
        #[test]
        fn relabeling_keeps_regenerations(steps in proptest::collection::vec(0u8..3, 1..200), salt in 1u32..1000) {
            // Random walk on the integers encoded as node labels.
            let mut pos = vec![0i64];
            for s in &steps {
                let p = *pos.last().unwrap();
                pos.push(if *s == 0 { p - 1 } else { p + 1 });
            }
            let label = |p: i64, salt: u32| ((p + 1000) as u32).wrapping_mul(2 * salt + 1) ^ salt;
            let times: Vec<f64> = (0..pos.len()).map(|i| i as f64).collect();
            let a = synthetic(&pos.iter().map(|&p| label(p, 0)).collect::<Vec<_>>(), &times, &pos, pos.len() as f64);
            let b = synthetic(&pos.iter().map(|&p| label(p, salt)).collect::<Vec<_>>(), &times, &pos, pos.len() as f64);
            let (ra, rb) = (detect_regenerations(&a, 3), detect_regenerations(&b, 3));
            prop_assert_eq!(&ra, &rb);
            prop_assert!(ra.indices.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
