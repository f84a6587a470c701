//! Offspring laws and every closed form that depends on `Z ~ μ` alone.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const NORMALIZATION_SLACK: f64 = 1e-9;

/// Finite-support progeny law with no mass at zero and mean above one.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    /// `(k, p_k)` sorted by `k`.
    support: Vec<(u32, f64)>,
    cdf: Vec<f64>,
    mean: f64,
}

impl OffspringDistribution {
    /// Builds the law from `(k, p_k)` pairs.
    ///
    /// Probabilities summing to within `1e-9` of one are renormalized; any
    /// larger deviation is rejected.
    pub fn new(pmf: &[(u64, f64)]) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::BadPmf("empty support".into()));
        }
        if pmf.iter().any(|&(k, _)| k == 0) {
            return Err(Error::ZeroKey);
        }
        let mut support: Vec<(u32, f64)> = Vec::with_capacity(pmf.len());
        for &(k, p) in pmf {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::BadPmf(format!("p_{k} = {p} is not a positive probability")));
            }
            let k = u32::try_from(k).map_err(|_| Error::BadPmf(format!("offspring count {k} too large")))?;
            support.push((k, p));
        }
        support.sort_by_key(|&(k, _)| k);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::BadPmf("repeated offspring count".into()));
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::BadPmf(format!("probabilities sum to {total}")));
        }
        for entry in &mut support {
            entry.1 /= total;
        }
        let mean: f64 = support.iter().map(|&(k, p)| k as f64 * p).sum();
        if mean <= 1.0 {
            return Err(Error::Subcritical { mean });
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = support
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self { support, cdf, mean })
    }

    /// Point mass at `k`.
    pub fn deterministic(k: u32) -> Result<Self> {
        Self::new(&[(k as u64, 1.0)])
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.support
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_offspring(&self) -> u32 {
        self.support.last().map_or(0, |&(k, _)| k)
    }

    pub fn min_offspring(&self) -> u32 {
        self.support.first().map_or(0, |&(k, _)| k)
    }

    pub fn is_degenerate(&self) -> bool {
        self.support.len() == 1
    }

    /// `E[f(Z)]`, exact over the support.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().map(|&(k, p)| p * f(k as f64)).sum()
    }

    /// Probability of exactly `k` children.
    pub fn prob(&self, k: u32) -> f64 {
        self.support
            .binary_search_by_key(&k, |&(j, _)| j)
            .map_or(0.0, |i| self.support[i].1)
    }

    /// Inverse-CDF draw from a uniform in `[0, 1)`.
    pub fn sample(&self, u: f64) -> u32 {
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.support.len() - 1);
        self.support[idx].0
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
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadAlpha(alpha))
    }
}

/// Asymptotic speed of the tagged particle in the variable speed model
/// started from the Bernoulli(`rho`) Palm measure:
/// `(1 - ρ) E[(Z-1)/(Z+1)] / E[1/(Z+1)]`.
pub fn speed_variable(d: &OffspringDistribution, rho: f64) -> Result<f64> {
    check_density(rho)?;
    let numerator = d.expect(|z| (z - 1.0) / (z + 1.0));
    let denominator = d.expect(|z| 1.0 / (z + 1.0));
    Ok((1.0 - rho) * numerator / denominator)
}

/// Asymptotic speed in the constant speed model started from the degree
/// dependent Palm measure with fugacity `alpha`:
/// `E[(Z-1)/(Z+1) · 1/(α(Z+1)+1)]`.
pub fn speed_constant(d: &OffspringDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(d.expect(|z| (z - 1.0) / (z + 1.0) / (alpha * (z + 1.0) + 1.0)))
}

/// Root-degree law under AGW: `P(deg o = k) = p_{k-1}`.
pub fn agw_root_degree_pmf(d: &OffspringDistribution) -> Vec<(u32, f64)> {
    d.support().iter().map(|&(k, p)| (k + 1, p)).collect()
}

/// Root-degree law under UGW, AGW reweighted by `1/deg(o)`.
pub fn ugw_root_degree_pmf(d: &OffspringDistribution) -> Vec<(u32, f64)> {
    tilted_root_degree_pmf(d, |deg| 1.0 / deg)
}

/// Root-degree law of the tilted constant speed environment measure,
/// proportional to `p_{k-1} / (αk + 1)`. Defined for `α > 0`.
pub fn q_constant_root_degree_pmf(d: &OffspringDistribution, alpha: f64) -> Result<Vec<(u32, f64)>> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(tilted_root_degree_pmf(d, |deg| 1.0 / (alpha * deg + 1.0)))
}

fn tilted_root_degree_pmf(d: &OffspringDistribution, weight: impl Fn(f64) -> f64) -> Vec<(u32, f64)> {
    let raw: Vec<(u32, f64)> = agw_root_degree_pmf(d)
        .into_iter()
        .map(|(deg, p)| (deg, p * weight(deg as f64)))
        .collect();
    let total: f64 = raw.iter().map(|&(_, w)| w).sum();
    raw.into_iter().map(|(deg, w)| (deg, w / total)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn binary() -> OffspringDistribution {
        OffspringDistribution::new(&[(1, 0.5), (3, 0.5)]).unwrap()
    }

    #[test]
    fn construction() {
        let d = OffspringDistribution::new(&[(2, 1.0)]).unwrap();
        assert_eq!(d.mean(), 2.0);
        assert_eq!(binary().mean(), 2.0);
        assert_eq!(OffspringDistribution::new(&[(0, 0.2), (2, 0.8)]), Err(Error::ZeroKey));
        assert!(matches!(OffspringDistribution::new(&[(1, 1.0)]), Err(Error::Subcritical { .. })));
        assert!(matches!(OffspringDistribution::new(&[(2, -0.5), (3, 1.5)]), Err(Error::BadPmf(_))));
        assert!(matches!(OffspringDistribution::new(&[(2, 0.5), (3, 0.4)]), Err(Error::BadPmf(_))));
        assert!(matches!(OffspringDistribution::new(&[(2, 0.5), (2, 0.5)]), Err(Error::BadPmf(_))));
    }

    #[test]
    fn renormalizes_small_deviation() {
        let d = OffspringDistribution::new(&[(2, 0.5 + 4e-10), (3, 0.5)]).unwrap();
        let total: f64 = d.support().iter().map(|&(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variable_speed_values() {
        let regular = OffspringDistribution::deterministic(2).unwrap();
        assert!(close(speed_variable(&regular, 0.0).unwrap(), 1.0));
        assert!(close(speed_variable(&regular, 0.3).unwrap(), 0.7));
        assert!(close(speed_variable(&binary(), 0.0).unwrap(), 2.0 / 3.0));
        assert_eq!(speed_variable(&regular, 1.0), Err(Error::BadDensity(1.0)));
        assert_eq!(speed_variable(&regular, -0.1), Err(Error::BadDensity(-0.1)));
    }

    #[test]
    fn constant_speed_values() {
        let regular = OffspringDistribution::deterministic(2).unwrap();
        assert!(close(speed_constant(&regular, 0.0).unwrap(), 1.0 / 3.0));
        assert!(close(speed_constant(&regular, 0.5).unwrap(), 2.0 / 15.0));
        assert!(close(speed_constant(&binary(), 1.0).unwrap(), 0.05));
        assert!(matches!(speed_constant(&regular, -1.0), Err(Error::BadAlpha(_))));
    }

    #[test]
    fn ugw_degrees() {
        let regular = OffspringDistribution::deterministic(2).unwrap();
        assert_eq!(ugw_root_degree_pmf(&regular), alloc::vec![(3, 1.0)]);
        let pmf = ugw_root_degree_pmf(&binary());
        assert_eq!(pmf.len(), 2);
        assert_eq!(pmf[0].0, 2);
        assert!(close(pmf[0].1, 2.0 / 3.0));
        assert_eq!(pmf[1].0, 4);
        assert!(close(pmf[1].1, 1.0 / 3.0));
    }

    #[test]
    fn q_constant_degrees() {
        // p_{k-1}/(k+1) at α = 1: 0.5/3 and 0.5/5, normalized.
        let pmf = q_constant_root_degree_pmf(&binary(), 1.0).unwrap();
        assert!(close(pmf[0].1, (1.0 / 6.0) / (1.0 / 6.0 + 1.0 / 10.0)));
        assert!(q_constant_root_degree_pmf(&binary(), 0.0).is_err());
    }

    #[test]
    fn sampling_inverts_cdf() {
        let d = binary();
        assert_eq!(d.sample(0.0), 1);
        assert_eq!(d.sample(0.4999), 1);
        assert_eq!(d.sample(0.5), 3);
        assert_eq!(d.sample(0.999_999), 3);
    }

    fn arb_law() -> impl Strategy<Value = OffspringDistribution> {
        prop::collection::btree_map(1u64..8, 0.05f64..1.0, 1..5)
            .prop_filter_map("supercritical", |m| {
                let total: f64 = m.values().sum();
                let pmf: alloc::vec::Vec<(u64, f64)> = m.into_iter().map(|(k, p)| (k, p / total)).collect();
                OffspringDistribution::new(&pmf).ok()
            })
    }

    proptest! {
        #[test]
        fn density_scales_linearly(d in arb_law(), rho in 0.0f64..0.99) {
            let base = speed_variable(&d, 0.0).unwrap();
            prop_assert!((speed_variable(&d, rho).unwrap() - (1.0 - rho) * base).abs() < 1e-12);
        }

        #[test]
        fn constant_speed_at_zero_is_walk_speed(d in arb_law()) {
            let walk = d.expect(|z| (z - 1.0) / (z + 1.0));
            prop_assert!((speed_constant(&d, 0.0).unwrap() - walk).abs() < 1e-12);
        }

        #[test]
        fn constant_speed_decreases(d in arb_law(), a in 0.0f64..20.0, step in 0.01f64..5.0) {
            let lo = speed_constant(&d, a).unwrap();
            let hi = speed_constant(&d, a + step).unwrap();
            prop_assert!(hi < lo);
            prop_assert!(speed_constant(&d, 1e9).unwrap() < 1e-8);
        }

        #[test]
        fn regular_time_change(k in 2u32..9, a in 0.0f64..10.0) {
            let d = OffspringDistribution::deterministic(k).unwrap();
            let m = d.mean();
            let rho = 1.0 - 1.0 / (a * (m + 1.0) + 1.0);
            let lhs = speed_constant(&d, a).unwrap() * (m + 1.0);
            prop_assert!((lhs - speed_variable(&d, rho).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn remark_inequality(d in arb_law(), a in 0.01f64..10.0) {
            let lhs = speed_constant(&d, a).unwrap();
            let rhs = d.expect(|z| (z - 1.0) / (z + 1.0)) * d.expect(|z| 1.0 / (a * (z + 1.0) + 1.0));
            if d.is_degenerate() {
                prop_assert!((lhs - rhs).abs() < 1e-12);
            } else {
                prop_assert!(lhs < rhs);
            }
        }

        #[test]
        fn ugw_pmf_normalized(d in arb_law()) {
            let total: f64 = ugw_root_degree_pmf(&d).iter().map(|&(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
