//! Exact finite-state computations for the exclusion process on tiny trees.
//!
//! States are occupancy bitmasks (bit `x` set when `x` is occupied). The
//! tagged chain additionally tracks the tagged particle: state
//! `eta * n + x` with `x` the tagged site.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::measures::SiteLaw;
use crate::tree::LazyTree;

/// Largest tree accepted by [`build_generator`].
pub const DEFAULT_CAP: usize = 12;
/// Largest tree accepted by [`build_tagged_generator`].
pub const TAGGED_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTree {
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
}

impl FiniteTree {
    /// Rooted at vertex 0.
    pub fn from_children(children: Vec<Vec<usize>>) -> Result<Self> {
        LazyTree::frozen(&children)?;
        let mut parent = vec![None; children.len()];
        for (v, list) in children.iter().enumerate() {
            for &c in list {
                parent[c] = Some(v);
            }
        }
        Ok(Self { children, parent })
    }

    /// `parents[i]` is the parent of vertex `i + 1`.
    pub fn from_parents(parents: &[usize]) -> Result<Self> {
        let n = parents.len() + 1;
        let mut children = vec![Vec::new(); n];
        for (i, &p) in parents.iter().enumerate() {
            if p >= n {
                return Err(Error::BadTree(alloc::format!("parent {p} out of range")));
            }
            children[p].push(i + 1);
        }
        Self::from_children(children)
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::from_parents(&(0..n.saturating_sub(1)).collect::<Vec<_>>())
    }

    pub fn star(leaves: usize) -> Result<Self> {
        Self::from_parents(&vec![0; leaves])
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn children(&self) -> &[Vec<usize>] {
        &self.children
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + self.parent[v].is_some() as usize
    }

    /// Undirected edges as (parent, child).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent.iter().enumerate().filter_map(|(c, p)| p.map(|p| (p, c)))
    }

    pub fn to_lazy(&self) -> LazyTree {
        LazyTree::frozen(&self.children).expect("validated on construction")
    }

    /// Canonical code of the rooted tree.
    pub fn code(&self) -> Vec<u8> {
        let mut t = self.to_lazy();
        let root = t.root();
        t.ball_code(root, self.len() as u32).expect("root exists")
    }
}

/// All rooted trees on `n` vertices up to isomorphism, in code order.
pub fn rooted_trees(n: usize) -> Vec<FiniteTree> {
    if n == 0 {
        return Vec::new();
    }
    let mut found = BTreeMap::new();
    let mut parents = vec![0usize; n - 1];
    loop {
        let t = FiniteTree::from_parents(&parents).expect("parent arrays form trees");
        found.entry(t.code()).or_insert(t);
        // Odometer over parents[i] in 0..=i.
        let mut i = 0;
        loop {
            if i == parents.len() {
                return found.into_values().collect();
            }
            if parents[i] < i {
                parents[i] += 1;
                break;
            }
            parents[i] = 0;
            i += 1;
        }
    }
}

/// Every rooted tree with `min..=max` vertices.
pub fn corpus(min: usize, max: usize) -> Vec<FiniteTree> {
    (min..=max).flat_map(rooted_trees).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub model: Model,
    /// Number of tree vertices.
    pub n: usize,
    /// Whether states carry the tagged particle.
    pub tagged: bool,
    pub q: DMatrix<f64>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Particle count of a state.
    pub fn particles(&self, state: usize) -> usize {
        self.occupancy(state).count_ones() as usize
    }

    pub fn occupancy(&self, state: usize) -> usize {
        if self.tagged {
            state / self.n
        } else {
            state
        }
    }

    fn valid(&self, state: usize) -> bool {
        !self.tagged || (state / self.n) >> (state % self.n) & 1 == 1
    }
}

fn rate(ft: &FiniteTree, model: Model, x: usize) -> f64 {
    model.rate(ft.degree(x) as u32)
}

/// Rate matrix of the exclusion process on occupancy bitmasks.
pub fn build_generator(ft: &FiniteTree, model: Model) -> Result<Generator> {
    build_generator_capped(ft, model, DEFAULT_CAP)
}

pub fn build_generator_capped(ft: &FiniteTree, model: Model, cap: usize) -> Result<Generator> {
    let n = ft.len();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let dim = 1usize << n;
    let mut q = DMatrix::zeros(dim, dim);
    for eta in 0..dim {
        for (a, b) in ft.edges() {
            for (x, y) in [(a, b), (b, a)] {
                if eta >> x & 1 == 1 && eta >> y & 1 == 0 {
                    let r = rate(ft, model, x);
                    let next = eta ^ (1 << x) ^ (1 << y);
                    q[(eta, next)] += r;
                    q[(eta, eta)] -= r;
                }
            }
        }
    }
    Ok(Generator { model, n, tagged: false, q })
}

/// Rate matrix of the joint chain (occupancies, tagged position).
pub fn build_tagged_generator(ft: &FiniteTree, model: Model) -> Result<Generator> {
    let n = ft.len();
    if n > TAGGED_CAP {
        return Err(Error::TooLarge { n, cap: TAGGED_CAP });
    }
    let dim = n << n;
    let mut q = DMatrix::zeros(dim, dim);
    for eta in 0..1usize << n {
        for tag in 0..n {
            if eta >> tag & 1 == 0 {
                continue;
            }
            let s = eta * n + tag;
            for (a, b) in ft.edges() {
                for (x, y) in [(a, b), (b, a)] {
                    if eta >> x & 1 == 1 && eta >> y & 1 == 0 {
                        let r = rate(ft, model, x);
                        let next_tag = if x == tag { y } else { tag };
                        let next = (eta ^ (1 << x) ^ (1 << y)) * n + next_tag;
                        q[(s, next)] += r;
                        q[(s, s)] -= r;
                    }
                }
            }
        }
    }
    Ok(Generator { model, n, tagged: true, q })
}

/// Occupancy probability of every vertex under a product law.
pub fn site_marginals(ft: &FiniteTree, law: SiteLaw) -> Vec<f64> {
    (0..ft.len())
        .map(|v| match law {
            SiteLaw::Bernoulli(rho) => rho,
            SiteLaw::Degree(alpha) => {
                let k = ft.degree(v) as f64;
                alpha * k / (1.0 + alpha * k)
            }
            SiteLaw::Full => 1.0,
        })
        .collect()
}

/// Product measure on occupancy bitmasks.
pub fn product_measure(ft: &FiniteTree, law: SiteLaw) -> Vec<f64> {
    let p = site_marginals(ft, law);
    (0..1usize << ft.len())
        .map(|eta| p.iter().enumerate().map(|(v, &pv)| if eta >> v & 1 == 1 { pv } else { 1.0 - pv }).product())
        .collect()
}

/// Palm version of the product measure with the tagged particle at the
/// root, on the states of [`build_tagged_generator`].
pub fn palm_tagged_measure(ft: &FiniteTree, law: SiteLaw) -> Vec<f64> {
    let n = ft.len();
    let p = site_marginals(ft, law);
    let mut out = vec![0.0; n << n];
    for eta in (0..1usize << n).filter(|eta| eta & 1 == 1) {
        out[eta * n] = (1..n).map(|v| if eta >> v & 1 == 1 { p[v] } else { 1.0 - p[v] }).product();
    }
    out
}

/// Connected components of the transition graph restricted to `states`.
fn components(g: &Generator, states: &[usize]) -> usize {
    let mut root: Vec<usize> = (0..states.len()).collect();
    fn find(root: &mut [usize], mut i: usize) -> usize {
        while root[i] != i {
            root[i] = root[root[i]];
            i = root[i];
        }
        i
    }
    for (i, &s) in states.iter().enumerate() {
        for (j, &t) in states.iter().enumerate() {
            if i != j && g.q[(s, t)] > 0.0 {
                let (a, b) = (find(&mut root, i), find(&mut root, j));
                root[a] = b;
            }
        }
    }
    (0..states.len()).filter(|&i| find(&mut root, i) == i).count()
}

/// Stationary distribution, restricted to states with `particle_count`
/// particles when given. Returned over all states of `g`.
pub fn stationary_distribution(g: &Generator, particle_count: Option<usize>) -> Result<Vec<f64>> {
    let states: Vec<usize> =
        (0..g.dim()).filter(|&s| g.valid(s) && particle_count.is_none_or(|k| g.particles(s) == k)).collect();
    if states.is_empty() {
        return Err(Error::InvalidArgument(alloc::format!("no state holds {particle_count:?} particles")));
    }
    let parts = components(g, &states);
    if parts != 1 {
        return Err(Error::SingularSector { components: parts });
    }
    let m = states.len();
    // Solve pi Q = 0 with the last balance equation replaced by sum(pi) = 1.
    let mut a = DMatrix::zeros(m, m);
    for (i, &s) in states.iter().enumerate() {
        for (j, &t) in states.iter().enumerate() {
            a[(j, i)] = g.q[(s, t)];
        }
    }
    for i in 0..m {
        a[(m - 1, i)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(m);
    b[m - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(Error::SingularSector { components: 1 })?;
    let mut out = vec![0.0; g.dim()];
    for (i, &s) in states.iter().enumerate() {
        out[s] = pi[i].max(0.0);
    }
    Ok(out)
}

/// Largest `|mu(a) q(a,b) - mu(b) q(b,a)|` over state pairs.
pub fn check_detailed_balance(g: &Generator, mu: &[f64]) -> Result<f64> {
    if mu.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: mu.len() });
    }
    let mut worst = 0.0f64;
    for a in 0..g.dim() {
        for b in a + 1..g.dim() {
            worst = worst.max((mu[a] * g.q[(a, b)] - mu[b] * g.q[(b, a)]).abs());
        }
    }
    Ok(worst)
}

/// Truncation error allowed per uniformization run.
const TRUNCATION: f64 = 1e-13;

/// `init exp(t Q)` by uniformization.
pub fn transient_distribution(g: &Generator, init: &[f64], t: f64) -> Result<Vec<f64>> {
    if init.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: init.len() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::BadHorizon(t));
    }
    let lambda = (0..g.dim()).map(|i| -g.q[(i, i)]).fold(0.0, f64::max);
    let mut v = nalgebra::DVector::from_column_slice(init);
    if lambda == 0.0 || t == 0.0 {
        return Ok(v.as_slice().to_vec());
    }
    // Column-vector form: v <- P^T v with P = I + Q / lambda.
    let pt = (DMatrix::identity(g.dim(), g.dim()) + &g.q / lambda).transpose();
    let chunks = libm::ceil(lambda * t / 30.0).max(1.0);
    let mean = lambda * t / chunks;
    for _ in 0..chunks as u64 {
        let mut term = v.clone();
        let mut weight = libm::exp(-mean);
        let mut acc = &term * weight;
        let mut mass = weight;
        let mut k = 0u32;
        while 1.0 - mass > TRUNCATION / chunks && k < 10_000 {
            k += 1;
            term = &pt * term;
            weight *= mean / k as f64;
            acc += &term * weight;
            mass += weight;
        }
        v = acc;
    }
    Ok(v.as_slice().to_vec())
}

/// Marginal law of the occupancies from a distribution over tagged states.
pub fn occupancy_marginal(g: &Generator, dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << g.n];
    for (s, &p) in dist.iter().enumerate() {
        out[g.occupancy(s)] += p;
    }
    out
}

/// Marginal law of the tagged position from a distribution over tagged
/// states.
pub fn tagged_marginal(g: &Generator, dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n];
    for (s, &p) in dist.iter().enumerate() {
        out[s % g.n] += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::total_variation;
    use proptest::prelude::*;

    fn all_small() -> Vec<FiniteTree> {
        corpus(2, 5)
    }

    #[test]
    fn rooted_tree_counts() {
        let counts: Vec<usize> = (1..=7).map(|n| rooted_trees(n).len()).collect();
        assert_eq!(counts, [1, 1, 2, 4, 9, 20, 48]);
        assert_eq!(corpus(2, 5).len(), 16);
    }

    #[test]
    fn single_edge() {
        let ft = FiniteTree::path(2).unwrap();
        let g = build_generator(&ft, Model::Variable).unwrap();
        // States: bit 0 = root, bit 1 = leaf; 01 = 1, 10 = 2.
        assert_eq!(g.q[(1, 2)], 1.0);
        assert_eq!(g.q[(2, 1)], 1.0);
        let nonzero = g.q.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 4);
        let c = build_generator(&ft, Model::Constant).unwrap();
        assert_eq!(c.q, g.q);
        let pi = stationary_distribution(&g, Some(1)).unwrap();
        assert!((pi[1] - 0.5).abs() < 1e-12 && (pi[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn star_constant_rates() {
        let ft = FiniteTree::star(3).unwrap();
        let g = build_generator(&ft, Model::Constant).unwrap();
        // Center alone (bit 0) to leaf 1 alone (bit 1).
        assert!((g.q[(0b0001, 0b0010)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.q[(0b0010, 0b0001)], 1.0);
        let pi = stationary_distribution(&g, Some(1)).unwrap();
        // One particle sits at x with probability proportional to deg(x).
        assert!((pi[0b0001] - 0.5).abs() < 1e-12);
        assert!((pi[0b0010] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn generators_are_valid() {
        for ft in all_small() {
            for model in [Model::Variable, Model::Constant] {
                let g = build_generator(&ft, model).unwrap();
                for i in 0..g.dim() {
                    let row: f64 = g.q.row(i).iter().sum();
                    assert!(row.abs() < 1e-12);
                    for j in 0..g.dim() {
                        if i != j {
                            assert!(g.q[(i, j)] >= 0.0);
                            if g.q[(i, j)] > 0.0 {
                                assert_eq!(g.particles(i), g.particles(j));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn variable_sectors_are_uniform() {
        for ft in all_small() {
            let g = build_generator(&ft, Model::Variable).unwrap();
            for k in 1..ft.len() {
                let pi = stationary_distribution(&g, Some(k)).unwrap();
                let size = (0..g.dim()).filter(|&s| g.particles(s) == k).count() as f64;
                for s in (0..g.dim()).filter(|&s| g.particles(s) == k) {
                    assert!((pi[s] - 1.0 / size).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn product_measures_are_reversible() {
        for ft in all_small() {
            let gv = build_generator(&ft, Model::Variable).unwrap();
            let gc = build_generator(&ft, Model::Constant).unwrap();
            for rho in [0.2, 0.5, 0.8] {
                let v = check_detailed_balance(&gv, &product_measure(&ft, SiteLaw::Bernoulli(rho))).unwrap();
                assert!(v <= 1e-12);
            }
            for alpha in [0.3, 1.0, 3.0] {
                let v = check_detailed_balance(&gc, &product_measure(&ft, SiteLaw::Degree(alpha))).unwrap();
                assert!(v <= 1e-12);
            }
        }
        let ft = FiniteTree::star(3).unwrap();
        let gc = build_generator(&ft, Model::Constant).unwrap();
        assert!(check_detailed_balance(&gc, &product_measure(&ft, SiteLaw::Bernoulli(0.5))).unwrap() > 1e-3);
        assert!(matches!(check_detailed_balance(&gc, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn whole_space_is_reducible() {
        let g = build_generator(&FiniteTree::path(3).unwrap(), Model::Variable).unwrap();
        assert_eq!(stationary_distribution(&g, None), Err(Error::SingularSector { components: 4 }));
    }

    #[test]
    fn caps() {
        let big = FiniteTree::path(13).unwrap();
        assert_eq!(build_generator(&big, Model::Variable), Err(Error::TooLarge { n: 13, cap: 12 }));
        let mid = FiniteTree::path(9).unwrap();
        assert!(matches!(build_tagged_generator(&mid, Model::Variable), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn uniformization() {
        let ft = FiniteTree::path(2).unwrap();
        let g = build_generator(&ft, Model::Variable).unwrap();
        let init = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(transient_distribution(&g, &init, 0.0).unwrap(), init.to_vec());
        // Two-state chain with both rates 1: P(stay) = (1 + e^{-2t}) / 2.
        let p = transient_distribution(&g, &init, 0.7).unwrap();
        assert!((p[1] - (1.0 + libm::exp(-1.4)) / 2.0).abs() < 1e-12);
        let late = transient_distribution(&g, &init, 200.0).unwrap();
        let pi = stationary_distribution(&g, Some(1)).unwrap();
        assert!(total_variation(&late, &pi) <= 1e-6);
    }

    #[test]
    fn tagged_chain_projects_to_occupancies() {
        for ft in corpus(2, 4) {
            for (model, law) in [(Model::Variable, SiteLaw::Bernoulli(0.4)), (Model::Constant, SiteLaw::Degree(0.8))] {
                let gt = build_tagged_generator(&ft, model).unwrap();
                let g = build_generator(&ft, model).unwrap();
                let init = palm_tagged_measure(&ft, law);
                assert!((init.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let pt = transient_distribution(&gt, &init, 0.5).unwrap();
                let p = transient_distribution(&g, &occupancy_marginal(&gt, &init), 0.5).unwrap();
                assert!(total_variation(&occupancy_marginal(&gt, &pt), &p) < 1e-12);
                assert!((tagged_marginal(&gt, &pt).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn uniformization_is_stochastic(tree in 0usize..16, t in 0.0f64..20.0, seed in any::<u64>()) {
            let ft = &corpus(2, 5)[tree];
            let g = build_generator(ft, Model::Constant).unwrap();
            let mut s = crate::stream::Stream::new(seed);
            let mut init: Vec<f64> = (0..g.dim()).map(|_| s.uniform()).collect();
            let total: f64 = init.iter().sum();
            init.iter_mut().for_each(|x| *x /= total);
            let p = transient_distribution(&g, &init, t).unwrap();
            prop_assert!(p.iter().all(|&x| x >= -1e-15));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
