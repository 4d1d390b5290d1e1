// SPDX-License-Identifier: Apache-2.0
//! The likelihood-ratio tracing attack.
//!
//! For a target record `x`, the statistic is
//! `L(x) = ln Pr[x; population model] - ln Pr[x; released model]`.
//! Small values point to membership: the attacker answers IN when `L(x)` is
//! at most the calibrated threshold.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learn::{learn_parameters, PriorSpec};
use crate::network::{BayesianNetwork, NetworkStructure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Population,
    Released,
}

/// A factor with probability zero met while scoring a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroFactor {
    pub model: Model,
    pub node: usize,
}

/// `L(x)` and, when both models share a structure, its per-attribute terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LrDecomposition {
    pub total: f64,
    /// `L_i(x)` per attribute; `None` for mismatched structures.
    pub per_attribute: Option<Vec<f64>>,
    /// CPT row picked by the record for each attribute; `None` for mismatched
    /// structures.
    pub active_rows: Option<Vec<usize>>,
    pub zero_factor: Option<ZeroFactor>,
}

/// `ln(p_pop / p_rel)` in log space. A zero under the released model rules
/// membership out and maps to `+inf`; otherwise a zero under the population
/// model maps to `-inf`.
fn log_ratio(pop: f64, rel: f64) -> f64 {
    if rel == f64::NEG_INFINITY {
        f64::INFINITY
    } else if pop == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        pop - rel
    }
}

fn check_compatible(population: &BayesianNetwork, released: &BayesianNetwork) -> Result<()> {
    let (a, b) = (population.structure(), released.structure());
    if a.cardinalities() != b.cardinalities() {
        return Err(Error::InvalidArgument(format!(
            "population and released models disagree on cardinalities: {:?} vs {:?}",
            a.cardinalities(),
            b.cardinalities()
        )));
    }
    Ok(())
}

fn same_structure(a: &NetworkStructure, b: &NetworkStructure) -> bool {
    a.parent_lists() == b.parent_lists()
}

pub fn lr_statistic(
    population: &BayesianNetwork,
    released: &BayesianNetwork,
    record: &[u32],
) -> Result<LrDecomposition> {
    check_compatible(population, released)?;
    population.check_record(record)?;

    let zero_factor = released
        .zero_factor(record)
        .map(|node| ZeroFactor {
            model: Model::Released,
            node,
        })
        .or_else(|| {
            population.zero_factor(record).map(|node| ZeroFactor {
                model: Model::Population,
                node,
            })
        });
    if let Some(z) = zero_factor {
        log::debug!(
            "zero-probability factor in {:?} model at node {}",
            z.model,
            z.node
        );
    }

    if !same_structure(population.structure(), released.structure()) {
        let total = log_ratio(
            population.log_joint_unchecked(record),
            released.log_joint_unchecked(record),
        );
        return Ok(LrDecomposition {
            total,
            per_attribute: None,
            active_rows: None,
            zero_factor,
        });
    }

    let m = population.node_count();
    let mut per_attribute = Vec::with_capacity(m);
    let mut active_rows = Vec::with_capacity(m);
    for i in 0..m {
        let (lp, v) = population.log_factor(i, record);
        let (lr, _) = released.log_factor(i, record);
        per_attribute.push(log_ratio(lp, lr));
        active_rows.push(v);
    }
    let total = if matches!(
        zero_factor,
        Some(ZeroFactor {
            model: Model::Released,
            ..
        })
    ) {
        f64::INFINITY
    } else {
        per_attribute.iter().sum()
    };
    Ok(LrDecomposition {
        total,
        per_attribute: Some(per_attribute),
        active_rows: Some(active_rows),
        zero_factor,
    })
}

/// `L(x)` for every row of `records`, evaluated in parallel, in row order.
pub fn statistics(
    population: &BayesianNetwork,
    released: &BayesianNetwork,
    records: &Dataset,
) -> Result<Vec<f64>> {
    check_compatible(population, released)?;
    if records.cardinalities() != population.structure().cardinalities() {
        return Err(Error::InvalidArgument(format!(
            "records have cardinalities {:?}, models expect {:?}",
            records.cardinalities(),
            population.structure().cardinalities()
        )));
    }
    let m = records.attribute_count();
    let rows: Vec<&[u32]> = records.rows().collect();
    Ok(rows
        .par_iter()
        .with_min_len(256)
        .map(|r| {
            debug_assert_eq!(r.len(), m);
            log_ratio(
                population.log_joint_unchecked(r),
                released.log_joint_unchecked(r),
            )
        })
        .collect())
}

/// The attacker's null model: released structure, parameters estimated on
/// the reference population.
pub fn fit_population_model(
    reference: &Dataset,
    released_structure: &NetworkStructure,
    prior: &PriorSpec,
) -> Result<BayesianNetwork> {
    learn_parameters(reference, released_structure, prior)
}

fn check_statistics(stats: &[f64], what: &str) -> Result<()> {
    if stats.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{what} statistics are empty"
        )));
    }
    if stats.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!(
            "{what} statistics contain NaN"
        )));
    }
    Ok(())
}

/// Lower empirical `alpha`-quantile of the reference statistics: the
/// largest cutoff `t` for which the fraction of statistics `<= t` does not
/// exceed `alpha`. Where that supremum is not attained, the largest
/// observed value below it is returned, or the float just under the minimum
/// when no such value exists.
pub fn calibrate_threshold(reference_statistics: &[f64], alpha: f64) -> Result<f64> {
    check_statistics(reference_statistics, "reference")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let mut sorted = reference_statistics.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let allowed = allowed_count(alpha, n);
    if allowed >= n {
        return Ok(sorted[n - 1]);
    }
    let bound = sorted[allowed];
    let below = sorted.partition_point(|&x| x < bound);
    Ok(if below > 0 {
        sorted[below - 1]
    } else {
        bound.next_down()
    })
}

/// Largest `k` with `k / n <= alpha`, robust to rounding in `alpha * n`.
fn allowed_count(alpha: f64, n: usize) -> usize {
    let mut k = ((alpha * n as f64).floor() as usize).min(n);
    while k < n && (k + 1) as f64 / n as f64 <= alpha {
        k += 1;
    }
    while k > 0 && k as f64 / n as f64 > alpha {
        k -= 1;
    }
    k
}

/// Fraction of `stats` at or below `threshold`.
pub fn fraction_at_or_below(stats: &[f64], threshold: f64) -> f64 {
    stats.iter().filter(|&&s| s <= threshold).count() as f64 / stats.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackDecision {
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// IN exactly when `statistic <= threshold`.
pub fn decide(statistic: f64, threshold: f64) -> AttackDecision {
    let verdict = if statistic <= threshold {
        Verdict::In
    } else {
        Verdict::Out
    };
    AttackDecision {
        statistic,
        threshold,
        verdict,
    }
}

/// ROC of the threshold sweep. `points[k] = (error, power)` at
/// `thresholds[k]`; the first entry is `(0, 0)` at `-inf` (nothing flagged)
/// and the last is `(1, 1)` at the largest observed statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// Power at error `alpha`, interpolating linearly between sweep points.
    /// Where several points share `alpha`, the highest power is taken.
    pub fn power_at(&self, alpha: f64) -> f64 {
        interpolate_power(&self.points, alpha)
    }

    pub fn to_dat(&self, comments: &[String]) -> String {
        format_curve(comments, &self.points)
    }
}

pub(crate) fn interpolate_power(points: &[(f64, f64)], alpha: f64) -> f64 {
    let mut best = f64::NAN;
    let mut consider = |b: f64| {
        if best.is_nan() || b > best {
            best = b;
        }
    };
    for (k, &(a, b)) in points.iter().enumerate() {
        if a == alpha {
            consider(b);
        }
        if let Some(&(a2, b2)) = points.get(k + 1) {
            if a < alpha && alpha < a2 {
                consider(b + (b2 - b) * (alpha - a) / (a2 - a));
            }
        }
    }
    if best.is_nan() {
        // outside the curve's span
        if alpha <= points.first().map_or(0.0, |p| p.0) {
            points.first().map_or(0.0, |p| p.1)
        } else {
            points.last().map_or(1.0, |p| p.1)
        }
    } else {
        best
    }
}

/// Two-column plot file: `#` comment lines, then `alpha power` rows with six
/// decimals.
pub fn format_curve(comments: &[String], points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    for &(a, b) in points {
        let _ = writeln!(out, "{a:.6} {b:.6}");
    }
    out
}

/// Sweeps the IN/OUT threshold over every distinct statistic. Power is
/// measured on pool members, error on non-members.
pub fn empirical_roc(pool_statistics: &[f64], population_statistics: &[f64]) -> Result<RocCurve> {
    check_statistics(pool_statistics, "pool")?;
    check_statistics(population_statistics, "population")?;
    let mut pool = pool_statistics.to_vec();
    let mut pop = population_statistics.to_vec();
    pool.sort_by(f64::total_cmp);
    pop.sort_by(f64::total_cmp);
    let (np, nq) = (pool.len() as f64, pop.len() as f64);

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::NEG_INFINITY];
    let (mut i, mut j) = (0usize, 0usize);
    while i < pool.len() || j < pop.len() {
        let t = match (pool.get(i), pop.get(j)) {
            (Some(&a), Some(&b)) => {
                if a.total_cmp(&b) == Ordering::Greater {
                    b
                } else {
                    a
                }
            }
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < pool.len() && pool[i] <= t {
            i += 1;
        }
        while j < pop.len() && pop[j] <= t {
            j += 1;
        }
        points.push((j as f64 / nq, i as f64 / np));
        thresholds.push(t);
    }
    let auc = trapezoid(&points);
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum()
}

/// Rank-sum (Mann-Whitney) form of the AUC: the probability that a pool
/// statistic falls below a population statistic, ties counting one half.
pub fn auc_rank(pool_statistics: &[f64], population_statistics: &[f64]) -> Result<f64> {
    check_statistics(pool_statistics, "pool")?;
    check_statistics(population_statistics, "population")?;
    let mut all: Vec<(f64, bool)> = pool_statistics
        .iter()
        .map(|&s| (s, false))
        .chain(population_statistics.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pop = 0.0;
    let mut k = 0;
    while k < all.len() {
        let mut end = k;
        while end + 1 < all.len() && all[end + 1].0 == all[k].0 {
            end += 1;
        }
        // midrank of the 1-based ranks k+1..=end+1
        let midrank = (k + end + 2) as f64 / 2.0;
        rank_sum_pop += midrank * all[k..=end].iter().filter(|e| e.1).count() as f64;
        k = end + 1;
    }
    let n_pool = pool_statistics.len() as f64;
    let n_pop = population_statistics.len() as f64;
    let u = rank_sum_pop - n_pop * (n_pop + 1.0) / 2.0;
    Ok(u / (n_pool * n_pop))
}
