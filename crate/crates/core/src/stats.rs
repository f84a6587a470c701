//! Small statistical toolkit: normal quantiles, chi-square tail
//! probabilities and summary statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Two-sided critical value for a confidence `level` in `(0, 1)`.
pub fn normal_critical(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

/// Inverse of [`normal_cdf`] by bisection; accurate to ~1e-15.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level {p} outside (0, 1)");
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..10_000 {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a)) * h
}

/// Upper tail `P(χ²_dof > stat)`.
pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return if stat > 0.0 { 0.0 } else { 1.0 };
    }
    gamma_q(dof as f64 / 2.0, stat / 2.0).clamp(0.0, 1.0)
}

/// Pearson goodness-of-fit of `observed` counts against `expected`
/// probabilities. Cells with expected count below `min_expected` are
/// pooled into one cell. Returns `(statistic, dof, p-value)`.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> Result<(f64, usize, f64)> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch { expected: expected.len(), got: observed.len() });
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        let e = p * n;
        if e < min_expected {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        return Err(Error::DegenerateBins { bins: cells.len() });
    }
    let stat: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len() - 1;
    Ok((stat, dof, chi_square_sf(stat, dof)))
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, libm::sqrt(v / xs.len() as f64))
}

/// Total variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles() {
        assert!((normal_critical(0.95) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.5)).abs() < 1e-14);
        assert!((normal_quantile(0.975) + normal_quantile(0.025)).abs() < 1e-12);
    }

    #[test]
    fn chi_square_tails() {
        // Closed forms: dof 2 gives exp(-x/2); dof 1 gives erfc(sqrt(x/2)).
        for &x in &[0.1, 1.0, 3.0, 10.0, 40.0] {
            assert!((chi_square_sf(x, 2) - libm::exp(-x / 2.0)).abs() < 1e-13);
            assert!((chi_square_sf(x, 1) - libm::erfc(libm::sqrt(x / 2.0))).abs() < 1e-12);
        }
        assert_eq!(chi_square_sf(0.0, 5), 1.0);
        assert!(chi_square_sf(1e4, 5) < 1e-100);
    }

    #[test]
    fn gof_pools_small_cells() {
        let (stat, dof, p) = chi_square_gof(&[50, 50, 0], &[0.5, 0.5, 0.0], 5.0).unwrap();
        assert_eq!(dof, 1);
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
        assert!(matches!(chi_square_gof(&[10], &[1.0], 5.0), Err(Error::DegenerateBins { .. })));
    }
}
