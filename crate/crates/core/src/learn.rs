// SPDX-License-Identifier: Apache-2.0
//! Structure search, Dirichlet parameter estimation and posterior synthesis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{BayesianNetwork, Cpt, NetworkStructure, DEFAULT_PROBABILITY_FLOOR};

/// Symmetric Dirichlet prior: the same pseudo-count in every dimension.
/// Learned CPT entries are then clamped to `floor` (if any) and
/// renormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorSpec {
    pub pseudo_count: f64,
    pub floor: Option<f64>,
}

impl PriorSpec {
    pub fn new(pseudo_count: f64) -> Result<Self> {
        if pseudo_count > 0.0 && pseudo_count.is_finite() {
            Ok(PriorSpec {
                pseudo_count,
                floor: Some(DEFAULT_PROBABILITY_FLOOR),
            })
        } else {
            Err(Error::InvalidArgument(format!(
                "prior pseudo-count must be positive, got {pseudo_count}"
            )))
        }
    }

    /// Replaces the probability floor; `None` keeps raw posterior means.
    pub fn with_floor(mut self, floor: Option<f64>) -> Result<Self> {
        if let Some(f) = floor {
            if !(f > 0.0 && f < 0.5) {
                return Err(Error::InvalidArgument(format!(
                    "probability floor must lie in (0, 0.5), got {f}"
                )));
            }
        }
        self.floor = floor;
        Ok(self)
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            pseudo_count: 1.0,
            floor: Some(DEFAULT_PROBABILITY_FLOOR),
        }
    }
}

/// How the parent-parent correlation term in the score denominator counts
/// pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairCounting {
    /// Each unordered pair `{j, k}`, `j != k`, contributes twice.
    #[default]
    Ordered,
    /// Each unordered pair contributes once.
    Unordered,
}

impl PairCounting {
    fn factor(self) -> f64 {
        match self {
            PairCounting::Ordered => 2.0,
            PairCounting::Unordered => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StructureSearchConfig {
    /// Maximum number of parents per node.
    pub eta: usize,
    /// Reserved for randomized tie-breaking; the search is deterministic.
    pub seed: u64,
    pub pair_counting: PairCounting,
}

impl StructureSearchConfig {
    pub fn with_eta(eta: usize) -> Self {
        StructureSearchConfig {
            eta,
            ..Default::default()
        }
    }
}

fn entropy(counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2 - 2 H(Xi, Xj) / (H(Xi) + H(Xj))` from empirical frequencies, natural
/// log. Zero when both columns are constant.
pub fn entropy_correlation(dataset: &Dataset, i: usize, j: usize) -> f64 {
    // fixed argument order keeps the value bit-for-bit symmetric
    let (i, j) = (i.min(j), i.max(j));
    let ki = dataset.cardinalities()[i] as usize;
    let kj = dataset.cardinalities()[j] as usize;
    let mut joint = vec![0u64; ki * kj];
    for row in dataset.rows() {
        joint[row[i] as usize * kj + row[j] as usize] += 1;
    }
    let mut mi = vec![0u64; ki];
    let mut mj = vec![0u64; kj];
    for a in 0..ki {
        for b in 0..kj {
            mi[a] += joint[a * kj + b];
            mj[b] += joint[a * kj + b];
        }
    }
    let n = dataset.row_count() as u64;
    if n == 0 {
        return 0.0;
    }
    let marginal = entropy(&mi, n) + entropy(&mj, n);
    if marginal <= 0.0 {
        return 0.0;
    }
    (2.0 - 2.0 * entropy(&joint, n) / marginal).clamp(0.0, 1.0)
}

/// All pairwise entropy correlations of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    m: usize,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn compute(dataset: &Dataset) -> Self {
        let m = dataset.attribute_count();
        let upper: Vec<(usize, usize, f64)> = (0..m)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..m).map(move |j| (i, j, entropy_correlation(dataset, i, j))))
            .collect();
        let mut values = vec![1.0; m * m];
        for (i, j, c) in upper {
            values[i * m + j] = c;
            values[j * m + i] = c;
        }
        CorrelationMatrix { m, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Correlation-based merit of `parents` as the parent set of `node`;
    /// zero for the empty set.
    pub fn parent_score(&self, node: usize, parents: &[usize], counting: PairCounting) -> f64 {
        if parents.is_empty() {
            return 0.0;
        }
        let relevance: f64 = parents.iter().map(|&j| self.get(node, j)).sum();
        let mut redundancy = 0.0;
        for (a, &j) in parents.iter().enumerate() {
            for &k in &parents[a + 1..] {
                redundancy += self.get(j, k);
            }
        }
        score_from_parts(relevance, redundancy, parents.len(), counting)
    }
}

fn score_from_parts(relevance: f64, redundancy: f64, size: usize, counting: PairCounting) -> f64 {
    relevance / (size as f64 + counting.factor() * redundancy).sqrt()
}

/// Score of `candidate_parents` for `node`, computing the needed
/// correlations directly from the data.
pub fn parent_score(
    dataset: &Dataset,
    node: usize,
    candidate_parents: &[usize],
    counting: PairCounting,
) -> Result<f64> {
    if candidate_parents.contains(&node) {
        return Err(Error::InvalidArgument(format!(
            "node {node} cannot be its own parent candidate"
        )));
    }
    if candidate_parents.is_empty() {
        return Ok(0.0);
    }
    let relevance: f64 = candidate_parents
        .iter()
        .map(|&j| entropy_correlation(dataset, node, j))
        .sum();
    let mut redundancy = 0.0;
    for (a, &j) in candidate_parents.iter().enumerate() {
        for &k in &candidate_parents[a + 1..] {
            redundancy += entropy_correlation(dataset, j, k);
        }
    }
    Ok(score_from_parts(
        relevance,
        redundancy,
        candidate_parents.len(),
        counting,
    ))
}

/// Greedy parent addition. Every round, each node below the cap proposes
/// the single acyclic parent addition that most increases its score
/// (lowest candidate index on ties). Proposals are applied in ascending
/// child order, skipping any that would close a cycle with additions made
/// earlier in the same round. Stops when no node improves.
pub fn learn_structure(
    dataset: &Dataset,
    config: &StructureSearchConfig,
) -> Result<NetworkStructure> {
    let corr = CorrelationMatrix::compute(dataset);
    learn_structure_with(dataset.cardinalities(), &corr, config)
}

pub fn learn_structure_with(
    cardinalities: &[u32],
    corr: &CorrelationMatrix,
    config: &StructureSearchConfig,
) -> Result<NetworkStructure> {
    let m = cardinalities.len();
    if corr.len() != m {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix is {}x{0}, dataset has {m} attributes",
            corr.len()
        )));
    }
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    // running numerator / pairwise sum / score per node
    let mut relevance = vec![0.0; m];
    let mut redundancy = vec![0.0; m];
    let mut score = vec![0.0; m];

    loop {
        let mut proposals: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..m {
            if parents[i].len() >= config.eta {
                continue;
            }
            let blocked = descendants(&children, i);
            let mut best: Option<(usize, f64)> = None;
            for (j, &is_blocked) in blocked.iter().enumerate() {
                if j == i || is_blocked || parents[i].contains(&j) {
                    continue;
                }
                let rel = relevance[i] + corr.get(i, j);
                let red = redundancy[i] + parents[i].iter().map(|&k| corr.get(j, k)).sum::<f64>();
                let s = score_from_parts(rel, red, parents[i].len() + 1, config.pair_counting);
                if s > score[i] && best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            if let Some((j, s)) = best {
                proposals.push((i, j, s));
            }
        }
        if proposals.is_empty() {
            break;
        }
        let mut applied = 0;
        for (i, j, s) in proposals {
            // j must not have become a descendant of i this round
            if descendants(&children, i)[j] {
                continue;
            }
            relevance[i] += corr.get(i, j);
            redundancy[i] += parents[i].iter().map(|&k| corr.get(j, k)).sum::<f64>();
            score[i] = s;
            parents[i].push(j);
            children[j].push(i);
            applied += 1;
        }
        debug_assert!(applied > 0);
    }
    NetworkStructure::new(cardinalities.to_vec(), parents, config.eta)
}

/// `out[k]` is true when `k` is `node` or reachable from it along child
/// edges.
fn descendants(children: &[Vec<usize>], node: usize) -> Vec<bool> {
    let mut seen = vec![false; children.len()];
    let mut stack = vec![node];
    seen[node] = true;
    while let Some(u) = stack.pop() {
        for &c in &children[u] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Per-row value counts for `node`: `rows x cardinality`, row-major.
pub fn count_table(dataset: &Dataset, structure: &NetworkStructure, node: usize) -> Vec<u64> {
    let k = structure.cardinalities()[node] as usize;
    let mut counts = vec![0u64; structure.parent_configurations(node) * k];
    for row in dataset.rows() {
        let v = structure.row_index(node, row);
        counts[v * k + row[node] as usize] += 1;
    }
    counts
}

fn check_schema(dataset: &Dataset, structure: &NetworkStructure) -> Result<()> {
    if dataset.cardinalities() != structure.cardinalities() {
        return Err(Error::InvalidArgument(format!(
            "dataset cardinalities {:?} do not match structure {:?}",
            dataset.cardinalities(),
            structure.cardinalities()
        )));
    }
    Ok(())
}

/// Posterior-mean CPTs, `(alpha + c) / sum(alpha + c)`, with each row's
/// sample count recorded as its support.
pub fn learn_parameters(
    dataset: &Dataset,
    structure: &NetworkStructure,
    prior: &PriorSpec,
) -> Result<BayesianNetwork> {
    check_schema(dataset, structure)?;
    let alpha = prior.pseudo_count;
    let cpts = (0..structure.node_count())
        .into_par_iter()
        .map(|i| {
            let k = structure.cardinalities()[i] as usize;
            let counts = count_table(dataset, structure, i);
            let mut probs = Vec::with_capacity(counts.len());
            let mut support = Vec::with_capacity(counts.len() / k);
            for row in counts.chunks_exact(k) {
                let n_v: u64 = row.iter().sum();
                let denom = k as f64 * alpha + n_v as f64;
                probs.extend(row.iter().map(|&c| (alpha + c as f64) / denom));
                support.push(n_v);
            }
            Cpt::from_flat(k, probs).map(|c| c.with_support(support))
        })
        .collect::<Result<Vec<_>>>()?;
    BayesianNetwork::new(
        structure.clone(),
        dataset.attribute_names().to_vec(),
        cpts,
        prior.floor,
    )
}

/// A CPT row estimated from too few records.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SupportWarning {
    pub node: usize,
    /// Parent-assignment row index.
    pub row: usize,
    pub support: u64,
}

/// Rows whose support is below `threshold`.
pub fn min_support_filter(
    network: &BayesianNetwork,
    threshold: u64,
) -> Result<Vec<SupportWarning>> {
    let mut out = Vec::new();
    for (node, cpt) in network.cpts().iter().enumerate() {
        let support = cpt.support().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "node {node} carries no support counts; learn parameters from data first"
            ))
        })?;
        out.extend(
            support
                .iter()
                .enumerate()
                .filter(|(_, &s)| s < threshold)
                .map(|(row, &s)| SupportWarning {
                    node,
                    row,
                    support: s,
                }),
        );
    }
    Ok(out)
}

/// Draws one network from the Dirichlet posterior of each CPT row
/// (normalized independent Gamma variates).
pub fn sample_posterior(
    dataset: &Dataset,
    structure: &NetworkStructure,
    prior: &PriorSpec,
    seed: u64,
) -> Result<BayesianNetwork> {
    check_schema(dataset, structure)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpts = Vec::with_capacity(structure.node_count());
    for i in 0..structure.node_count() {
        let k = structure.cardinalities()[i] as usize;
        let counts = count_table(dataset, structure, i);
        let mut probs = Vec::with_capacity(counts.len());
        for row in counts.chunks_exact(k) {
            let draws: Vec<f64> = row
                .iter()
                .map(|&c| {
                    let g = Gamma::new(prior.pseudo_count + c as f64, 1.0)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    Ok(g.sample(&mut rng))
                })
                .collect::<Result<_>>()?;
            let total: f64 = draws.iter().sum();
            if total > 0.0 {
                probs.extend(draws.iter().map(|g| g / total));
            } else {
                // every shape tiny enough to underflow; fall back to uniform
                probs.extend(std::iter::repeat_n(1.0 / k as f64, k));
            }
        }
        cpts.push(Cpt::from_flat(k, probs)?);
    }
    BayesianNetwork::new(
        structure.clone(),
        dataset.attribute_names().to_vec(),
        cpts,
        prior.floor,
    )
}

/// Learns a structure under `eta`, draws parameters from the posterior and
/// samples `count` records from the resulting network.
pub fn synthesize(
    dataset: &Dataset,
    eta: usize,
    count: usize,
    seed: u64,
    prior: &PriorSpec,
) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot synthesize from an empty dataset".into(),
        ));
    }
    let structure = learn_structure(dataset, &StructureSearchConfig::with_eta(eta))?;
    let model = sample_posterior(dataset, &structure, prior, seed)?;
    Ok(model.sample(count, seed.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;

    fn binary(records: &[[u32; 2]]) -> Dataset {
        let recs: Vec<Vec<u32>> = records.iter().map(|r| r.to_vec()).collect();
        Dataset::new(Schema::binary(2), &recs).unwrap()
    }

    fn from_counts(counts: &[([u32; 2], usize)]) -> Dataset {
        let mut recs = Vec::new();
        for (r, c) in counts {
            recs.extend(std::iter::repeat_n(*r, *c));
        }
        binary(&recs)
    }

    #[test]
    fn correlation_examples() {
        let dup = binary(&[[0, 0], [1, 1], [1, 1], [0, 0], [1, 1]]);
        assert!((entropy_correlation(&dup, 0, 1) - 1.0).abs() < 1e-12);

        let indep = from_counts(&[([0, 0], 25), ([0, 1], 25), ([1, 0], 25), ([1, 1], 25)]);
        assert!(entropy_correlation(&indep, 0, 1).abs() < 1e-12);

        let diag = from_counts(&[([0, 0], 50), ([1, 1], 50)]);
        assert!((entropy_correlation(&diag, 0, 1) - 1.0).abs() < 1e-12);

        let constant = binary(&[[0, 0], [0, 0]]);
        assert_eq!(entropy_correlation(&constant, 0, 1), 0.0);
        // one constant column: H(X,Y) = H(Y), corr = 2 - 2 = 0
        let half = binary(&[[0, 0], [0, 1]]);
        assert!(entropy_correlation(&half, 0, 1).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let d = binary(&[[0, 1], [1, 1], [1, 0]]);
        let c = entropy_correlation(&d, 0, 1);
        let s = parent_score(&d, 0, &[1], PairCounting::Ordered).unwrap();
        assert!((s - c).abs() < 1e-15);
        assert_eq!(
            parent_score(&d, 0, &[], PairCounting::Ordered).unwrap(),
            0.0
        );
        assert!(parent_score(&d, 0, &[0], PairCounting::Ordered).is_err());

        // corr(i,j) = corr(i,k) = 0.5, corr(j,k) = 0
        let corr = CorrelationMatrix {
            m: 3,
            values: vec![1.0, 0.5, 0.5, 0.5, 1.0, 0.0, 0.5, 0.0, 1.0],
        };
        let s = corr.parent_score(0, &[1, 2], PairCounting::Ordered);
        assert!((s - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn pair_counting_changes_denominator() {
        let corr = CorrelationMatrix {
            m: 3,
            values: vec![1.0, 0.6, 0.4, 0.6, 1.0, 0.5, 0.4, 0.5, 1.0],
        };
        let ordered = corr.parent_score(0, &[1, 2], PairCounting::Ordered);
        let unordered = corr.parent_score(0, &[1, 2], PairCounting::Unordered);
        assert!((ordered - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((unordered - 1.0 / 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eta_zero_is_edgeless() {
        let d = binary(&[[0, 0], [1, 1], [1, 1], [0, 1]]);
        let s = learn_structure(&d, &StructureSearchConfig::with_eta(0)).unwrap();
        assert_eq!(s.edge_count(), 0);
        assert_eq!(s.complexity(), 2);
    }

    #[test]
    fn duplicated_pair_gets_single_edge_into_lower_index() {
        // x1 copies x0; x2 is unrelated noise
        let recs: Vec<Vec<u32>> = (0..40u32)
            .map(|r| {
                let a = (r * 7 + 3) % 5 % 2;
                vec![a, a, (r / 3) % 2]
            })
            .collect();
        let d = Dataset::new(Schema::binary(3), &recs).unwrap();
        let s = learn_structure(&d, &StructureSearchConfig::with_eta(1)).unwrap();
        assert_eq!(s.parents(0), &[1]);
        assert!(!s.parents(1).contains(&0));
        assert!(s.parent_lists().iter().all(|p| p.len() <= 1));
    }

    #[test]
    fn parameters_match_posterior_formula() {
        let d = from_counts(&[([0, 0], 3), ([1, 0], 1)]);
        let s = NetworkStructure::edgeless(vec![2, 2]).unwrap();
        let net = learn_parameters(&d, &s, &PriorSpec::default()).unwrap();
        let row = net.cpt(0).row(0);
        assert!((row[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((row[1] - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(net.cpt(0).support(), Some(&[4u64][..]));
    }

    #[test]
    fn unseen_parent_assignment_falls_back_to_prior() {
        let schema = Schema::new(vec!["a".into(), "b".into()], vec![2, 3]).unwrap();
        let d = Dataset::new(schema, &[vec![0, 2], vec![0, 1]]).unwrap();
        let s = NetworkStructure::new(vec![2, 3], vec![vec![], vec![0]], 1).unwrap();
        let net = learn_parameters(&d, &s, &PriorSpec::default()).unwrap();
        for p in net.cpt(1).row(1) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(net.cpt(1).support(), Some(&[2u64, 0][..]));
    }

    #[test]
    fn tiny_prior_recovers_mle() {
        let d = from_counts(&[([0, 0], 7), ([1, 0], 3)]);
        let s = NetworkStructure::edgeless(vec![2, 2]).unwrap();
        let net = learn_parameters(&d, &s, &PriorSpec::new(1e-9).unwrap()).unwrap();
        assert!((net.cpt(0).row(0)[0] - 0.7).abs() < 1e-6);
        assert!((net.cpt(0).row(0)[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn prior_must_be_positive() {
        assert!(PriorSpec::new(0.0).is_err());
        assert!(PriorSpec::new(-1.0).is_err());
        assert!(PriorSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn support_filter() {
        let recs: Vec<Vec<u32>> = (0..100u32)
            .map(|r| vec![u32::from(r < 12), r % 2])
            .collect();
        let d = Dataset::new(Schema::binary(2), &recs).unwrap();
        let s = NetworkStructure::new(vec![2, 2], vec![vec![], vec![0]], 1).unwrap();
        let net = learn_parameters(&d, &s, &PriorSpec::default()).unwrap();
        assert!(min_support_filter(&net, 0).unwrap().is_empty());
        let warnings = min_support_filter(&net, 50).unwrap();
        assert_eq!(
            warnings,
            vec![SupportWarning {
                node: 1,
                row: 1,
                support: 12
            }]
        );
        let generated = BayesianNetwork::random(s, 0.2, 0.8, 1).unwrap();
        assert!(min_support_filter(&generated, 1).is_err());
    }

    #[test]
    fn synthesize_contract() {
        let recs: Vec<Vec<u32>> = (0..60u32).map(|r| vec![r % 2, (r / 2) % 2]).collect();
        let d = Dataset::new(Schema::binary(2), &recs).unwrap();
        let prior = PriorSpec::default();
        let empty = synthesize(&d, 1, 0, 4, &prior).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.schema(), d.schema());
        let a = synthesize(&d, 1, 300, 4, &prior).unwrap();
        assert_eq!(a.row_count(), 300);
        assert_eq!(a, synthesize(&d, 1, 300, 4, &prior).unwrap());
        let empty_source = Dataset::empty(d.schema().clone());
        assert!(synthesize(&empty_source, 1, 10, 0, &prior).is_err());
    }
}
