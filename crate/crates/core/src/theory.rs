// SPDX-License-Identifier: Apache-2.0
//! Closed-form leakage analysis.
//!
//! Under the Gaussian approximation the LR statistic has mean `C/(2n)` and
//! variance `C/n` on non-members, and mean `-C/(2n)` with the same variance
//! on pool members, where `C` is the released model's complexity and `n` the
//! pool size. Equating quantiles gives `z_alpha + z_{1-beta} = sqrt(C/n)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::attack::{format_curve, interpolate_power};
use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
/// Below this argument erfc uses the power series, above it the continued
/// fraction.
const ERFC_SPLIT: f64 = 2.5;
const CF_DEPTH: usize = 160;

/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_k 2^k x^(2k+1) / (1*3*...*(2k+1))`.
/// All terms are positive, so there is no cancellation for moderate `x`.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > sum * 1e-17 {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Continued fraction `x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))`, evaluated
/// bottom-up; `erfc(x) = exp(-x^2) / (sqrt(pi) * cf(x))` for `x > 0`.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=CF_DEPTH).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    f
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < ERFC_SPLIT {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() / (PI.sqrt() * erfc_continued_fraction(x))
    }
}

/// `ln erfc(x)`, finite far into the upper tail.
fn ln_erfc(x: f64) -> f64 {
    if x < ERFC_SPLIT {
        erfc(x).ln()
    } else {
        -x * x - (PI.sqrt() * erfc_continued_fraction(x)).ln()
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, accurate for very negative `x`.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -5.0 {
        normal_cdf(x).ln()
    } else {
        0.5f64.ln() + ln_erfc(-x * FRAC_1_SQRT_2)
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Rational approximation of the normal quantile (P. J. Acklam), relative
// error about 1e-9 before refinement.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383_577_518_672_69e2,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn quantile_initial(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of [`normal_cdf`] for `p` strictly inside `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        // 1 - p is exact here
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = quantile_initial(p);
    // one Halley step on Phi(x) - p
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    x
}

/// `z_s`: the standard normal quantile at level `1 - s`.
pub fn z(s: f64) -> Result<f64> {
    normal_quantile(s).map(|q| -q)
}

fn check_counts(complexity: f64, pool_size: f64) -> Result<()> {
    if !(complexity >= 0.0 && complexity.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "complexity must be a finite non-negative number, got {complexity}"
        )));
    }
    if !(pool_size >= 1.0 && pool_size.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pool size must be at least 1, got {pool_size}"
        )));
    }
    Ok(())
}

/// Leading-order moments of the LR statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryProfile {
    pub complexity: f64,
    pub pool_size: f64,
    /// Mean and variance on non-members.
    pub mu0: f64,
    pub var0: f64,
    /// Mean and variance on pool members.
    pub mu1: f64,
    pub var1: f64,
    /// Gaussian-DP parameter of the training mechanism, if any.
    pub gdp_mu: Option<f64>,
}

impl TheoryProfile {
    pub fn with_gdp(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "GDP mu must be >= 0, got {mu}"
            )));
        }
        self.gdp_mu = Some(mu);
        Ok(self)
    }

    /// Power at error `alpha`, capped by the GDP limit when present.
    pub fn power(&self, alpha: f64) -> Result<f64> {
        let beta = bound_power(self.complexity, self.pool_size, alpha)?;
        match self.gdp_mu {
            Some(mu) => Ok(beta.min(gdp_power_cap(mu, alpha)?)),
            None => Ok(beta),
        }
    }
}

pub fn lr_moments(complexity: f64, pool_size: f64) -> Result<TheoryProfile> {
    check_counts(complexity, pool_size)?;
    let mean = complexity / (2.0 * pool_size);
    let var = complexity / pool_size;
    Ok(TheoryProfile {
        complexity,
        pool_size,
        mu0: mean,
        var0: var,
        mu1: -mean,
        var1: var,
        gdp_mu: None,
    })
}

/// `beta = Phi(sqrt(C/n) - z_alpha)`.
pub fn bound_power(complexity: f64, pool_size: f64, alpha: f64) -> Result<f64> {
    check_counts(complexity, pool_size)?;
    let z_alpha = z(alpha)?;
    Ok(normal_cdf((complexity / pool_size).sqrt() - z_alpha))
}

/// AUC of the bound: `Phi(sqrt(C/(2n)))`.
pub fn bound_auc(complexity: f64, pool_size: f64) -> Result<f64> {
    check_counts(complexity, pool_size)?;
    Ok(normal_cdf((complexity / (2.0 * pool_size)).sqrt()))
}

/// Variance of the LR statistic for a Naive Bayes model with `m` binary
/// attributes (one class attribute), including the exact second-order term:
/// `C/n + m^2/(4n^2) * (1/(p1(1-p1)) - 4)` with `C = 2m - 1`.
pub fn naive_bayes_variance(
    attribute_count: u64,
    pool_size: f64,
    class_marginal: f64,
) -> Result<f64> {
    if attribute_count < 1 {
        return Err(Error::InvalidArgument("need at least one attribute".into()));
    }
    if !(class_marginal > 0.0 && class_marginal < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "class marginal must lie in (0, 1), got {class_marginal}"
        )));
    }
    let m = attribute_count as f64;
    check_counts(2.0 * m - 1.0, pool_size)?;
    let n = pool_size;
    let correction =
        m * m / (4.0 * n * n) * (1.0 / (class_marginal * (1.0 - class_marginal)) - 4.0);
    Ok((2.0 * m - 1.0) / n + correction)
}

/// Largest power a `mu`-GDP mechanism allows at error `alpha`:
/// `Phi(mu - z_alpha)`.
pub fn gdp_power_cap(mu: f64, alpha: f64) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "GDP mu must be >= 0, got {mu}"
        )));
    }
    Ok(normal_cdf(mu - z(alpha)?))
}

/// `delta(eps)` of the `(eps, delta)`-DP guarantees implied by `mu`-GDP:
/// `Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2)`, with the second
/// term formed in log space.
pub fn gdp_delta(epsilon: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "GDP mu must be > 0, got {mu}"
        )));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let first = normal_cdf(-epsilon / mu + mu / 2.0);
    let second = (epsilon + ln_normal_cdf(-epsilon / mu - mu / 2.0)).exp();
    Ok((first - second).clamp(0.0, 1.0))
}

/// `count` error levels spaced logarithmically from `low` to `high`
/// inclusive.
pub fn log_grid(low: f64, high: f64, count: usize) -> Vec<f64> {
    assert!(low > 0.0 && high >= low && count >= 2);
    let (a, b) = (low.ln(), high.ln());
    (0..count)
        .map(|k| {
            if k + 1 == count {
                high
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Power-error curve implied by the bound, sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl BoundCurve {
    pub fn power_at(&self, alpha: f64) -> f64 {
        interpolate_power(&self.points, alpha)
    }

    pub fn to_dat(&self, comments: &[String]) -> String {
        format_curve(comments, &self.points)
    }
}

/// Bound curve on `grid` (values in `(0, 1]`; `alpha = 1` maps to power 1).
/// With a GDP cap the AUC is integrated numerically, otherwise it is the
/// closed form.
pub fn bound_curve(profile: &TheoryProfile, grid: &[f64]) -> Result<BoundCurve> {
    let power = |a: f64| -> Result<f64> {
        if a >= 1.0 {
            Ok(1.0)
        } else {
            profile.power(a)
        }
    };
    let points = grid
        .iter()
        .map(|&a| power(a).map(|b| (a, b)))
        .collect::<Result<Vec<_>>>()?;
    let auc = match profile.gdp_mu {
        None => bound_auc(profile.complexity, profile.pool_size)?,
        Some(_) => {
            // midpoint rule on a uniform grid
            const STEPS: usize = 20_000;
            let mut s = 0.0;
            for k in 0..STEPS {
                s += power((k as f64 + 0.5) / STEPS as f64)?;
            }
            s / STEPS as f64
        }
    };
    Ok(BoundCurve { points, auc })
}

/// `z_alpha + z_{1-beta}` for an observed operating point; compare with
/// `sqrt(C/n)`.
pub fn separation(alpha: f64, beta: f64) -> Result<f64> {
    Ok(z(alpha)? + normal_quantile(beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // mpmath: ncdf(1.4702)
        assert!((normal_cdf(1.4702) - 0.929_246_202_639_548).abs() < 1e-7);
        let x = normal_quantile(normal_cdf(0.7)).unwrap();
        assert!((x - 0.7).abs() < 1e-6);
    }

    #[test]
    fn cdf_is_continuous_at_series_split() {
        let y = ERFC_SPLIT;
        let below = 1.0 - erf_series(y);
        let above = (-y * y).exp() / (PI.sqrt() * erfc_continued_fraction(y));
        assert!((below - above).abs() < 1e-13, "{below} vs {above}");
    }

    #[test]
    fn quantile_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((z(0.05).unwrap() - 1.6448536269514722).abs() < 1e-9);
    }

    #[test]
    fn moments_examples() {
        let p = lr_moments(446.0, 3000.0).unwrap();
        assert!((p.mu0 - 0.074333).abs() < 1e-6);
        assert!((p.var0 - 0.148667).abs() < 1e-6);
        assert_eq!(p.mu1, -p.mu0);
        assert_eq!(p.var1, p.var0);
        let zero = lr_moments(0.0, 10.0).unwrap();
        assert_eq!(
            (zero.mu0, zero.var0, zero.mu1, zero.var1),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert!(lr_moments(1.0, 0.0).is_err());
        assert!(lr_moments(-1.0, 5.0).is_err());
    }

    #[test]
    fn bound_power_examples() {
        for a in [0.01, 0.2, 0.5, 0.9] {
            assert!((bound_power(0.0, 100.0, a).unwrap() - a).abs() < 1e-12);
        }
        assert!((bound_power(500.0, 500.0, 0.5).unwrap() - 0.841345).abs() < 1e-6);
        let mut last = 0.0;
        for c in [1.0, 10.0, 100.0, 1000.0] {
            let b = bound_power(c, 1000.0, 0.05).unwrap();
            assert!(b > last);
            last = b;
        }
        assert!(bound_power(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bound_auc_examples() {
        assert!((bound_auc(446.0, 3000.0).unwrap() - 0.6074).abs() < 5e-5);
        assert!((bound_auc(1000.0, 1000.0).unwrap() - 0.7602).abs() < 5e-5);
        assert_eq!(bound_auc(0.0, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn naive_bayes_examples() {
        assert_eq!(naive_bayes_variance(7, 50.0, 0.5).unwrap(), 13.0 / 50.0);
        let v = naive_bayes_variance(10, 100.0, 0.25).unwrap();
        assert!((v - (0.19 + 0.0025 * (16.0 / 3.0 - 4.0))).abs() < 1e-15);
        for p in [0.01, 0.3, 0.49, 0.51, 0.9] {
            assert!(naive_bayes_variance(5, 20.0, p).unwrap() > 9.0 / 20.0);
        }
        assert!(naive_bayes_variance(5, 20.0, 0.0).is_err());
        assert!(naive_bayes_variance(5, 20.0, 1.0).is_err());
        assert!(naive_bayes_variance(0, 20.0, 0.5).is_err());
    }

    #[test]
    fn gdp_cap_examples() {
        for a in [0.01, 0.1, 0.5] {
            assert!((gdp_power_cap(0.0, a).unwrap() - a).abs() < 1e-9);
        }
        assert!((gdp_power_cap(1.0, 0.05).unwrap() - 0.2595).abs() < 1e-4);
        let mut last = 0.0;
        for mu in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let b = gdp_power_cap(mu, 0.05).unwrap();
            assert!(b >= last);
            last = b;
        }
        assert!(gdp_power_cap(-1.0, 0.05).is_err());
    }

    #[test]
    fn gdp_delta_examples() {
        assert!((gdp_delta(0.0, 1.0).unwrap() - 0.382925).abs() < 1e-6);
        assert!(gdp_delta(40.0, 1.0).unwrap() < 1e-12);
        assert!(gdp_delta(1.0, 0.0).is_err());
        assert!(gdp_delta(-1.0, 1.0).is_err());
    }

    #[test]
    fn profile_power_takes_gdp_minimum() {
        let p = lr_moments(2000.0, 1000.0).unwrap().with_gdp(0.5).unwrap();
        let a = 0.1;
        let expected = gdp_power_cap(0.5, a).unwrap();
        assert!(expected < bound_power(2000.0, 1000.0, a).unwrap());
        assert_eq!(p.power(a).unwrap(), expected);
        let curve = bound_curve(&p, &log_grid(1e-3, 1.0, 50)).unwrap();
        assert!(curve.auc < bound_auc(2000.0, 1000.0).unwrap());
    }

    #[test]
    fn log_grid_shape() {
        let g = log_grid(1e-3, 1.0, 200);
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert_eq!(g[199], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn separation_inverts_bound() {
        let beta = bound_power(300.0, 1000.0, 0.05).unwrap();
        assert!((separation(0.05, beta).unwrap() - 0.3f64.sqrt()).abs() < 1e-9);
    }
}
