// SPDX-License-Identifier: Apache-2.0
//! Repeated-split tracing experiments.
//!
//! Each split draws a pool and a disjoint reference population from the
//! general population, releases a model learned on the pool, fits the
//! attacker's null model on the reference population and scores pool
//! members against held-out non-members. Split `s` uses seed `seed + s`, so
//! results do not depend on how splits are scheduled.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{empirical_roc, fit_population_model, statistics};
use crate::dataset::{self, BiasSpec, BiasTarget, Dataset, Schema, SplitIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::learn::{
    learn_parameters, learn_structure, min_support_filter, PriorSpec, StructureSearchConfig,
    SupportWarning,
};
use crate::network::{BayesianNetwork, NetworkStructure};
use crate::theory::{bound_auc, bound_curve, log_grid, lr_moments};

/// Error levels at which split ROCs are averaged.
pub const ALPHA_GRID_POINTS: usize = 200;
pub const ALPHA_GRID_MIN: f64 = 1e-3;

/// Mixed into the experiment seed when drawing a population from a
/// generator, so the population stream differs from every split stream.
const POPULATION_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Where the general population comes from.
#[derive(Clone, Debug)]
pub enum PopulationSource {
    Dataset(Dataset),
    /// A known generating network; `size` records are drawn once per
    /// experiment.
    Generator {
        model: BayesianNetwork,
        size: usize,
    },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub population: PopulationSource,
    pub pool_size: usize,
    pub reference_size: usize,
    /// Cap on the non-member evaluation set; all remaining rows otherwise.
    pub nonmember_size: Option<usize>,
    pub eta_released: usize,
    /// Learn the attacker's null model with its own structure under this cap
    /// instead of reusing the released structure.
    pub eta_population_model: Option<usize>,
    pub splits: usize,
    pub bias: Option<f64>,
    pub bias_target: BiasTarget,
    pub bias_max_attempts: u64,
    /// Release a random structure with this many edges instead of a learned
    /// one.
    pub random_structure_edges: Option<usize>,
    /// Release this structure (for example the generator's own) instead of a
    /// learned one.
    pub released_structure: Option<NetworkStructure>,
    pub seed: u64,
    pub prior: PriorSpec,
    /// Use the released model as the attacker's null model (no-leakage
    /// control).
    pub control: bool,
    /// Count pool members among the negatives when measuring error.
    pub include_pool_in_negatives: bool,
    pub min_support: u64,
}

impl ExperimentConfig {
    pub fn new(population: PopulationSource, pool_size: usize, reference_size: usize) -> Self {
        ExperimentConfig {
            population,
            pool_size,
            reference_size,
            nonmember_size: None,
            eta_released: 0,
            eta_population_model: None,
            splits: 50,
            bias: None,
            bias_target: BiasTarget::AllAttributes,
            bias_max_attempts: BiasSpec::new(0.0).max_attempts,
            random_structure_edges: None,
            released_structure: None,
            seed: 0,
            prior: PriorSpec::default(),
            control: false,
            include_pool_in_negatives: false,
            min_support: 50,
        }
    }

    fn validate(&self, population: &Dataset) -> Result<()> {
        let population_rows = population.row_count();
        if self.splits == 0 {
            return Err(Error::Config("splits must be at least 1".into()));
        }
        if self.pool_size == 0 || self.reference_size == 0 {
            return Err(Error::Config(
                "pool and reference sizes must be positive".into(),
            ));
        }
        if self.pool_size + self.reference_size >= population_rows {
            return Err(Error::Config(format!(
                "pool ({}) + reference ({}) leaves no non-members in a population of {population_rows}",
                self.pool_size, self.reference_size
            )));
        }
        if self.nonmember_size == Some(0) {
            return Err(Error::Config("nonmember_size must be positive".into()));
        }
        if self.released_structure.is_some() && self.random_structure_edges.is_some() {
            return Err(Error::Config(
                "released_structure and random_structure_edges are mutually exclusive".into(),
            ));
        }
        if let Some(s) = &self.released_structure {
            if s.cardinalities() != population.cardinalities() {
                return Err(Error::Config(
                    "released structure does not match the population's attributes".into(),
                ));
            }
        }
        if self.control && self.eta_population_model.is_some() {
            return Err(Error::Config(
                "control and eta_population_model are mutually exclusive".into(),
            ));
        }
        Ok(())
    }

    /// Parses the flat `key = value` experiment file. Relative paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve(base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_toml_str(&text, base)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    population_data: Option<PathBuf>,
    population_schema: Option<PathBuf>,
    population_model: Option<PathBuf>,
    population_size: Option<usize>,
    pool_size: usize,
    reference_size: usize,
    nonmember_size: Option<usize>,
    #[serde(default)]
    eta_released: usize,
    eta_population_model: Option<usize>,
    splits: Option<usize>,
    bias: Option<f64>,
    bias_attribute: Option<usize>,
    bias_max_attempts: Option<u64>,
    random_structure_edges: Option<usize>,
    released_structure: Option<PathBuf>,
    seed: u64,
    prior: Option<f64>,
    #[serde(default)]
    control: bool,
    #[serde(default)]
    include_pool_in_negatives: bool,
    min_support: Option<u64>,
}

impl RawConfig {
    fn resolve(self, base: &Path) -> Result<ExperimentConfig> {
        let abs = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let population = match (self.population_data, self.population_model) {
            (Some(data), None) => {
                if self.population_size.is_some() {
                    return Err(Error::Config(
                        "population_size only applies with population_model".into(),
                    ));
                }
                let schema = self.population_schema.map(abs);
                PopulationSource::Dataset(dataset::load_csv(&abs(data), schema.as_deref())?)
            }
            (None, Some(model)) => {
                let size = self.population_size.ok_or_else(|| {
                    Error::Config("population_model requires population_size".into())
                })?;
                PopulationSource::Generator {
                    model: BayesianNetwork::load(&abs(model))?,
                    size,
                }
            }
            _ => {
                return Err(Error::Config(
                    "exactly one of population_data and population_model is required".into(),
                ))
            }
        };
        let mut cfg = ExperimentConfig::new(population, self.pool_size, self.reference_size);
        cfg.nonmember_size = self.nonmember_size;
        cfg.eta_released = self.eta_released;
        cfg.eta_population_model = self.eta_population_model;
        if let Some(s) = self.splits {
            cfg.splits = s;
        }
        cfg.bias = self.bias;
        if let Some(i) = self.bias_attribute {
            cfg.bias_target = BiasTarget::Attribute(i);
        }
        if let Some(a) = self.bias_max_attempts {
            cfg.bias_max_attempts = a;
        }
        cfg.random_structure_edges = self.random_structure_edges;
        if let Some(path) = self.released_structure {
            cfg.released_structure = Some(BayesianNetwork::load(&abs(path))?.structure().clone());
        }
        cfg.seed = self.seed;
        if let Some(p) = self.prior {
            cfg.prior = PriorSpec::new(p)?;
        }
        cfg.control = self.control;
        cfg.include_pool_in_negatives = self.include_pool_in_negatives;
        if let Some(s) = self.min_support {
            cfg.min_support = s;
        }
        Ok(cfg)
    }
}

/// Per-split outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitSummary {
    pub split: usize,
    pub seed: u64,
    pub auc: f64,
    pub complexity: u64,
    pub edge_count: usize,
    pub support_warnings: usize,
    /// Power on the report's alpha grid.
    #[serde(skip)]
    pub power: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub eta_released: usize,
    pub pool_size: usize,
    pub reference_size: usize,
    pub splits: Vec<SplitSummary>,
    pub alpha_grid: Vec<f64>,
    pub mean_power: Vec<f64>,
    pub mean_auc: f64,
    /// Sample standard deviation of the per-split AUCs (0 for one split).
    pub auc_std: f64,
    /// Mean released complexity over splits; the theory curve uses it.
    pub complexity: f64,
    pub mean_edge_count: f64,
    pub theory_power: Vec<f64>,
    pub theory_auc: f64,
    /// Low-support rows of the first split's released model.
    pub support_warnings: Vec<SupportWarning>,
    pub model_mismatch: bool,
    pub control: bool,
    pub biased: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn mean_roc_dat(&self) -> String {
        let points: Vec<(f64, f64)> = self
            .alpha_grid
            .iter()
            .copied()
            .zip(self.mean_power.iter().copied())
            .collect();
        crate::attack::format_curve(
            &[
                format!("mean empirical ROC over {} splits", self.splits.len()),
                format!(
                    "eta {} complexity {:.1} pool {}",
                    self.eta_released, self.complexity, self.pool_size
                ),
                format!("mean AUC {:.6}", self.mean_auc),
                "alpha power".into(),
            ],
            &points,
        )
    }

    pub fn theory_dat(&self) -> String {
        let points: Vec<(f64, f64)> = self
            .alpha_grid
            .iter()
            .copied()
            .zip(self.theory_power.iter().copied())
            .collect();
        crate::attack::format_curve(
            &[
                format!(
                    "bound for complexity {:.1} pool {}",
                    self.complexity, self.pool_size
                ),
                format!("AUC {:.6}", self.theory_auc),
                "alpha power".into(),
            ],
            &points,
        )
    }

    /// Standard error of the mean AUC across splits.
    pub fn auc_standard_error(&self) -> f64 {
        self.auc_std / (self.splits.len() as f64).sqrt()
    }
}

fn draw_population(source: &PopulationSource, seed: u64) -> Dataset {
    match source {
        PopulationSource::Dataset(d) => d.clone(),
        PopulationSource::Generator { model, size } => {
            model.sample(*size, seed ^ POPULATION_SEED_SALT)
        }
    }
}

fn draw_split(population: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Result<SplitIndices> {
    let n = population.row_count();
    let mut idx = match cfg.bias {
        None => dataset::split_indices(
            n,
            &SplitSpec {
                pool_size: cfg.pool_size,
                reference_size: cfg.reference_size,
                seed,
            },
        )?,
        Some(bias) => {
            let spec = BiasSpec {
                bias,
                target: cfg.bias_target,
                max_attempts: cfg.bias_max_attempts,
            };
            let pool = dataset::biased_sample_indices(population, cfg.pool_size, &spec, seed)?;
            let mut in_pool = vec![false; n];
            pool.iter().for_each(|&i| in_pool[i] = true);
            let mut others: Vec<usize> = (0..n).filter(|&i| !in_pool[i]).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(32));
            others.shuffle(&mut rng);
            if others.len() < cfg.reference_size {
                return Err(Error::Config("reference population does not fit".into()));
            }
            let mut rest = others.split_off(cfg.reference_size);
            others.sort_unstable();
            rest.sort_unstable();
            SplitIndices {
                pool,
                reference: others,
                rest,
            }
        }
    };
    if let Some(cap) = cfg.nonmember_size {
        if idx.rest.len() > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(16));
            idx.rest.shuffle(&mut rng);
            idx.rest.truncate(cap);
            idx.rest.sort_unstable();
        }
    }
    Ok(idx)
}

struct SplitOutcome {
    summary: SplitSummary,
    warnings: Vec<SupportWarning>,
}

fn run_split(
    population: &Dataset,
    cfg: &ExperimentConfig,
    split: usize,
    grid: &[f64],
) -> Result<SplitOutcome> {
    let seed = cfg.seed.wrapping_add(split as u64);
    let idx = draw_split(population, cfg, seed)?;
    let pool = population.select(&idx.pool);
    let reference = population.select(&idx.reference);
    let negatives = if cfg.include_pool_in_negatives {
        let mut all = idx.rest.clone();
        all.extend_from_slice(&idx.pool);
        population.select(&all)
    } else {
        population.select(&idx.rest)
    };

    let structure = match (&cfg.released_structure, cfg.random_structure_edges) {
        (Some(fixed), _) => fixed.clone(),
        (None, Some(edges)) => random_structure(
            population.cardinalities(),
            cfg.eta_released,
            edges,
            seed,
            RANDOM_STRUCTURE_ATTEMPTS,
        )?,
        (None, None) => learn_structure(&pool, &StructureSearchConfig::with_eta(cfg.eta_released))?,
    };
    let released = learn_parameters(&pool, &structure, &cfg.prior)?;
    let null_model = if cfg.control {
        released.clone()
    } else if let Some(eta) = cfg.eta_population_model {
        let s = learn_structure(&reference, &StructureSearchConfig::with_eta(eta))?;
        learn_parameters(&reference, &s, &cfg.prior)?
    } else {
        fit_population_model(&reference, &structure, &cfg.prior)?
    };

    let member_stats = statistics(&null_model, &released, &pool)?;
    let negative_stats = statistics(&null_model, &released, &negatives)?;
    let roc = empirical_roc(&member_stats, &negative_stats)?;
    let warnings = min_support_filter(&released, cfg.min_support)?;
    Ok(SplitOutcome {
        summary: SplitSummary {
            split,
            seed,
            auc: roc.auc,
            complexity: structure.complexity(),
            edge_count: structure.edge_count(),
            support_warnings: warnings.len(),
            power: grid.iter().map(|&a| roc.power_at(a)).collect(),
        },
        warnings,
    })
}

/// Runs every split and averages ROCs vertically on a logarithmic error grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let population = draw_population(&cfg.population, cfg.seed);
    cfg.validate(&population)?;
    let grid = log_grid(ALPHA_GRID_MIN, 1.0, ALPHA_GRID_POINTS);

    let mut outcomes = (0..cfg.splits)
        .into_par_iter()
        .map(|s| {
            run_split(&population, cfg, s, &grid).map_err(|e| Error::Split {
                split: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let k = outcomes.len() as f64;
    let mean_auc = outcomes.iter().map(|o| o.summary.auc).sum::<f64>() / k;
    let auc_std = if outcomes.len() > 1 {
        (outcomes
            .iter()
            .map(|o| (o.summary.auc - mean_auc).powi(2))
            .sum::<f64>()
            / (k - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let mean_power: Vec<f64> = (0..grid.len())
        .map(|g| outcomes.iter().map(|o| o.summary.power[g]).sum::<f64>() / k)
        .collect();
    let complexity = outcomes
        .iter()
        .map(|o| o.summary.complexity as f64)
        .sum::<f64>()
        / k;
    let mean_edge_count = outcomes
        .iter()
        .map(|o| o.summary.edge_count as f64)
        .sum::<f64>()
        / k;

    let profile = lr_moments(complexity, cfg.pool_size as f64)?;
    let theory = bound_curve(&profile, &grid)?;
    let support_warnings = std::mem::take(&mut outcomes[0].warnings);

    Ok(ExperimentReport {
        eta_released: cfg
            .released_structure
            .as_ref()
            .map_or(cfg.eta_released, |s| s.eta()),
        pool_size: cfg.pool_size,
        reference_size: cfg.reference_size,
        splits: outcomes.into_iter().map(|o| o.summary).collect(),
        alpha_grid: grid,
        mean_power,
        mean_auc,
        auc_std,
        complexity,
        mean_edge_count,
        theory_power: theory.points.iter().map(|p| p.1).collect(),
        theory_auc: theory.auc,
        support_warnings,
        model_mismatch: cfg.eta_population_model.is_some(),
        control: cfg.control,
        biased: cfg.bias.is_some(),
    })
}

pub const RANDOM_STRUCTURE_ATTEMPTS: u64 = 1_000_000;

/// Places `edge_count` edges by proposing uniformly random ordered pairs
/// `(parent, child)` and keeping those that respect the parent cap and
/// acyclicity.
pub fn random_structure(
    cardinalities: &[u32],
    eta: usize,
    edge_count: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<NetworkStructure> {
    let m = cardinalities.len();
    if edge_count > 0 && m < 2 {
        return Err(Error::InvalidArgument(
            "need at least two nodes for edges".into(),
        ));
    }
    let capacity = (m * eta).min(m * m.saturating_sub(1) / 2);
    if edge_count > capacity {
        return Err(Error::InvalidArgument(format!(
            "{edge_count} edges cannot fit {m} nodes with at most {eta} parents each"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut placed = 0;
    let mut attempts = 0u64;
    while placed < edge_count {
        if attempts >= max_attempts {
            return Err(Error::BudgetExhausted {
                attempts,
                detail: format!("placed {placed} of {edge_count} random edges"),
            });
        }
        attempts += 1;
        let parent = rng.random_range(0..m);
        let child = rng.random_range(0..m);
        if parent == child || parents[child].len() >= eta || parents[child].contains(&parent) {
            continue;
        }
        if reaches(&children, child, parent) {
            continue;
        }
        parents[child].push(parent);
        children[parent].push(child);
        placed += 1;
    }
    NetworkStructure::new(cardinalities.to_vec(), parents, eta)
}

fn reaches(children: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = vec![false; children.len()];
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if !std::mem::replace(&mut seen[u], true) {
            stack.extend_from_slice(&children[u]);
        }
    }
    false
}

/// One row of the structure comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub eta: usize,
    pub edges: f64,
    pub complexity: f64,
    pub pool_size: usize,
    pub empirical_auc: f64,
    pub theoretical_auc: f64,
}

impl TableRow {
    pub fn from_report(report: &ExperimentReport) -> Self {
        TableRow {
            eta: report.eta_released,
            edges: report.mean_edge_count,
            complexity: report.complexity,
            pool_size: report.pool_size,
            empirical_auc: report.mean_auc,
            theoretical_auc: report.theory_auc,
        }
    }

    /// Row whose theoretical AUC comes straight from the bound.
    pub fn with_bound(
        eta: usize,
        edges: f64,
        complexity: f64,
        pool_size: usize,
        empirical_auc: f64,
    ) -> Result<Self> {
        Ok(TableRow {
            eta,
            edges,
            complexity,
            pool_size,
            empirical_auc,
            theoretical_auc: bound_auc(complexity, pool_size as f64)?,
        })
    }
}

/// Aligned plain-text table and CSV, rows ordered by complexity.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub text: String,
    pub csv: String,
}

pub fn compare_table(reports: &[ExperimentReport]) -> Result<ComparisonTable> {
    let rows: Vec<TableRow> = reports.iter().map(TableRow::from_report).collect();
    format_table(&rows)
}

pub fn format_table(rows: &[TableRow]) -> Result<ComparisonTable> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to compare".into()));
    }
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.complexity.total_cmp(&b.complexity));

    let header = [
        "eta",
        "edges",
        "complexity",
        "pool",
        "auc_empirical",
        "auc_theoretical",
    ];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.eta.to_string(),
                trim_float(r.edges),
                trim_float(r.complexity),
                r.pool_size.to_string(),
                format!("{:.4}", r.empirical_auc),
                format!("{:.4}", r.theoretical_auc),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let line = |out: &mut String, items: &[&str]| {
        let parts: Vec<String> = items
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(&mut text, &header);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut text, &refs);
    }

    let mut csv = header.join(",");
    csv.push('\n');
    for row in &cells {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(ComparisonTable { text, csv })
}

fn trim_float(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

/// Writes a report's files into `dir`: `report.json`, `roc.dat`,
/// `bound.dat`.
pub fn write_report(
    report: &ExperimentReport,
    dir: &Path,
) -> Result<BTreeMap<&'static str, PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = BTreeMap::new();
    for (name, body) in [
        ("report.json", report.to_json()),
        ("roc.dat", report.mean_roc_dat()),
        ("bound.dat", report.theory_dat()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.insert(name, path);
    }
    Ok(written)
}

/// Schema used when a generator model seeds the population.
pub fn population_schema(source: &PopulationSource) -> Schema {
    match source {
        PopulationSource::Dataset(d) => d.schema().clone(),
        PopulationSource::Generator { model, .. } => model.schema(),
    }
}
