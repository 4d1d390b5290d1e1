// SPDX-License-Identifier: Apache-2.0
//! Discrete Bayesian networks.
//!
//! CPT layout: the row for node `i` under a parent assignment is the
//! mixed-radix number formed by the parent values in parent-list order, the
//! first parent being the most significant digit. A parentless node has a
//! single row.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};

/// Probabilities below this are raised to it at construction time unless the
/// caller opts out.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-6;

const SUM_TOLERANCE: f64 = 1e-9;

/// A DAG over `m` attributes, stored as ordered parent lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkStructure {
    cardinalities: Vec<u32>,
    parents: Vec<Vec<usize>>,
    eta: usize,
    order: Vec<usize>,
}

impl NetworkStructure {
    /// Validates the parent lists against the cap `eta` and checks acyclicity.
    pub fn new(cardinalities: Vec<u32>, parents: Vec<Vec<usize>>, eta: usize) -> Result<Self> {
        let m = cardinalities.len();
        if parents.len() != m {
            return Err(Error::InvalidNetwork(format!(
                "{} parent lists for {m} nodes",
                parents.len()
            )));
        }
        if let Some(i) = cardinalities.iter().position(|&c| c < 2) {
            return Err(Error::InvalidNetwork(format!(
                "node {i} has cardinality {} (< 2)",
                cardinalities[i]
            )));
        }
        for (i, pa) in parents.iter().enumerate() {
            if pa.len() > eta {
                return Err(Error::InvalidNetwork(format!(
                    "node {i} has {} parents, cap is {eta}",
                    pa.len()
                )));
            }
            for (k, &p) in pa.iter().enumerate() {
                if p >= m {
                    return Err(Error::InvalidNetwork(format!(
                        "node {i} lists parent {p} out of range"
                    )));
                }
                if p == i {
                    return Err(Error::InvalidNetwork(format!("node {i} is its own parent")));
                }
                if pa[..k].contains(&p) {
                    return Err(Error::InvalidNetwork(format!(
                        "node {i} lists parent {p} twice"
                    )));
                }
            }
        }
        let order = topological_order(&parents)?;
        Ok(NetworkStructure {
            cardinalities,
            parents,
            eta,
            order,
        })
    }

    pub fn edgeless(cardinalities: Vec<u32>) -> Result<Self> {
        let m = cardinalities.len();
        NetworkStructure::new(cardinalities, vec![Vec::new(); m], 0)
    }

    pub fn node_count(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn parent_lists(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// The parent cap this structure was built under.
    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Topological order; among ready nodes the lowest index comes first.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Number of distinct parent assignments of `node` (1 when parentless).
    pub fn parent_configurations(&self, node: usize) -> usize {
        self.parents[node]
            .iter()
            .map(|&p| self.cardinalities[p] as usize)
            .product()
    }

    /// Number of free parameters: sum over nodes of
    /// `parent_configurations * (cardinality - 1)`.
    pub fn complexity(&self) -> u64 {
        (0..self.node_count())
            .map(|i| self.parent_configurations(i) as u64 * (self.cardinalities[i] as u64 - 1))
            .sum()
    }

    /// CPT row selected by `record` for `node`.
    pub fn row_index(&self, node: usize, record: &[u32]) -> usize {
        self.parents[node].iter().fold(0usize, |acc, &p| {
            acc * self.cardinalities[p] as usize + record[p] as usize
        })
    }

    fn check_record(&self, record: &[u32]) -> Result<()> {
        if record.len() != self.node_count() {
            return Err(Error::InvalidArgument(format!(
                "record has {} values, network has {} nodes",
                record.len(),
                self.node_count()
            )));
        }
        if let Some(i) = (0..record.len()).find(|&i| record[i] >= self.cardinalities[i]) {
            return Err(Error::InvalidArgument(format!(
                "record value {} for node {i} exceeds cardinality {}",
                record[i], self.cardinalities[i]
            )));
        }
        Ok(())
    }
}

/// Kahn's algorithm over parent lists with a lowest-index-first tie-break.
/// On a cycle, the error carries the nodes of one cycle in edge order.
pub fn topological_order(parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let m = parents.len();
    let mut children = vec![Vec::new(); m];
    let mut pending = vec![0usize; m];
    for (i, pa) in parents.iter().enumerate() {
        for &p in pa {
            if p >= m {
                return Err(Error::InvalidNetwork(format!(
                    "node {i} lists parent {p} out of range"
                )));
            }
            children[p].push(i);
            pending[i] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..m).filter(|&i| pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == m {
        return Ok(order);
    }
    // Every unplaced node has an unplaced parent, so walking parents must
    // revisit a node.
    let start = (0..m).find(|&i| pending[i] > 0).unwrap_or(0);
    let mut seen = HashMap::new();
    let mut path = Vec::new();
    let mut node = start;
    while !seen.contains_key(&node) {
        seen.insert(node, path.len());
        path.push(node);
        node = parents[node]
            .iter()
            .copied()
            .find(|&p| pending[p] > 0)
            .unwrap_or(node);
    }
    let mut cycle = path.split_off(seen[&node]);
    cycle.reverse();
    Err(Error::Cycle(cycle))
}

/// Conditional probability table of one node: one probability vector per
/// parent assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    cardinality: usize,
    probs: Vec<f64>,
    support: Option<Vec<u64>>,
}

impl Cpt {
    /// Each row must have `cardinality` entries in `[0, 1]` summing to 1
    /// within 1e-9.
    pub fn new(cardinality: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut probs = Vec::with_capacity(rows.len() * cardinality);
        for (v, row) in rows.iter().enumerate() {
            if row.len() != cardinality {
                return Err(Error::InvalidNetwork(format!(
                    "row {v} has {} entries, expected {cardinality}",
                    row.len()
                )));
            }
            probs.extend_from_slice(row);
        }
        Cpt::from_flat(cardinality, probs)
    }

    pub fn from_flat(cardinality: usize, probs: Vec<f64>) -> Result<Self> {
        if cardinality < 2 || probs.is_empty() || !probs.len().is_multiple_of(cardinality) {
            return Err(Error::InvalidNetwork(format!(
                "{} probabilities do not form rows of width {cardinality}",
                probs.len()
            )));
        }
        for (v, row) in probs.chunks_exact(cardinality).enumerate() {
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidNetwork(format!(
                    "row {v} has probability {p} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidNetwork(format!("row {v} sums to {sum}")));
            }
        }
        Ok(Cpt {
            cardinality,
            probs,
            support: None,
        })
    }

    /// Attaches per-row sample counts (the number of records each row was
    /// estimated from).
    pub fn with_support(mut self, support: Vec<u64>) -> Self {
        assert_eq!(support.len(), self.row_count(), "one support count per row");
        self.support = Some(support);
        self
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn row_count(&self) -> usize {
        self.probs.len() / self.cardinality
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.probs[v * self.cardinality..(v + 1) * self.cardinality]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.probs.chunks_exact(self.cardinality)
    }

    pub fn probability(&self, v: usize, value: u32) -> f64 {
        self.probs[v * self.cardinality + value as usize]
    }

    pub fn support(&self) -> Option<&[u64]> {
        self.support.as_deref()
    }

    /// Raises entries below `floor` to `floor` and renormalizes the rows
    /// that changed.
    fn apply_floor(&mut self, floor: f64) {
        let k = self.cardinality;
        for row in self.probs.chunks_exact_mut(k) {
            if row.iter().any(|&p| p < floor) {
                row.iter_mut().for_each(|p| *p = p.max(floor));
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }
}

/// A structure plus one CPT per node. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct BayesianNetwork {
    structure: NetworkStructure,
    names: Vec<String>,
    cpts: Vec<Cpt>,
    log_probs: Vec<Vec<f64>>,
}

impl BayesianNetwork {
    /// `floor`: see [`DEFAULT_PROBABILITY_FLOOR`]; `None` keeps the tables
    /// exactly as given, zeros included.
    pub fn new(
        structure: NetworkStructure,
        names: Vec<String>,
        mut cpts: Vec<Cpt>,
        floor: Option<f64>,
    ) -> Result<Self> {
        let m = structure.node_count();
        if names.len() != m || cpts.len() != m {
            return Err(Error::InvalidNetwork(format!(
                "{m} nodes but {} names and {} tables",
                names.len(),
                cpts.len()
            )));
        }
        for (i, cpt) in cpts.iter().enumerate() {
            let k = structure.cardinalities()[i] as usize;
            let rows = structure.parent_configurations(i);
            if cpt.cardinality() != k || cpt.row_count() != rows {
                return Err(Error::InvalidNetwork(format!(
                    "node {i}: table is {}x{}, structure needs {rows}x{k}",
                    cpt.row_count(),
                    cpt.cardinality()
                )));
            }
        }
        if let Some(floor) = floor {
            if !(0.0..0.5).contains(&floor) {
                return Err(Error::InvalidArgument(format!(
                    "probability floor {floor} outside [0, 0.5)"
                )));
            }
            cpts.iter_mut().for_each(|c| c.apply_floor(floor));
        }
        let log_probs = cpts
            .iter()
            .map(|c| c.probs.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(BayesianNetwork {
            structure,
            names,
            cpts,
            log_probs,
        })
    }

    /// Network with every row drawn as independent uniform weights in
    /// `[low, high]`, normalized. Useful as a known generator.
    pub fn random(structure: NetworkStructure, low: f64, high: f64, seed: u64) -> Result<Self> {
        if !(0.0 < low && low <= high) {
            return Err(Error::InvalidArgument(format!(
                "weight range [{low}, {high}] must be positive and ordered"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cpts = Vec::with_capacity(structure.node_count());
        for i in 0..structure.node_count() {
            let k = structure.cardinalities()[i] as usize;
            let mut probs = Vec::with_capacity(k * structure.parent_configurations(i));
            for _ in 0..structure.parent_configurations(i) {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(low..=high)).collect();
                let s: f64 = w.iter().sum();
                probs.extend(w.iter().map(|x| x / s));
            }
            cpts.push(Cpt::from_flat(k, probs)?);
        }
        let names = default_names(structure.node_count());
        BayesianNetwork::new(structure, names, cpts, None)
    }

    pub fn structure(&self) -> &NetworkStructure {
        &self.structure
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn node_count(&self) -> usize {
        self.structure.node_count()
    }

    pub fn complexity(&self) -> u64 {
        self.structure.complexity()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            names: self.names.clone(),
            cardinalities: self.structure.cardinalities().to_vec(),
        }
    }

    /// `ln Pr[x_i | parents]` for node `i` and the CPT row it used. Assumes a
    /// validated record.
    #[inline]
    pub fn log_factor(&self, node: usize, record: &[u32]) -> (f64, usize) {
        let v = self.structure.row_index(node, record);
        let k = self.cpts[node].cardinality;
        (self.log_probs[node][v * k + record[node] as usize], v)
    }

    /// Natural-log joint probability of `record`. A zero table entry yields
    /// negative infinity.
    pub fn log_joint(&self, record: &[u32]) -> Result<f64> {
        self.structure.check_record(record)?;
        Ok(self.log_joint_unchecked(record))
    }

    pub(crate) fn log_joint_unchecked(&self, record: &[u32]) -> f64 {
        let total: f64 = (0..self.node_count())
            .map(|i| self.log_factor(i, record).0)
            .sum();
        if total == f64::NEG_INFINITY {
            if let Some(i) = self.zero_factor(record) {
                log::debug!("zero-probability factor at node {i} ({})", self.names[i]);
            }
        }
        total
    }

    /// First node whose factor for `record` has probability zero.
    pub fn zero_factor(&self, record: &[u32]) -> Option<usize> {
        (0..self.node_count()).find(|&i| self.log_factor(i, record).0 == f64::NEG_INFINITY)
    }

    pub(crate) fn check_record(&self, record: &[u32]) -> Result<()> {
        self.structure.check_record(record)
    }

    /// Ancestral sampling in topological order.
    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        let m = self.node_count();
        let order = self.structure.topological_order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0u32; count * m];
        for record in values.chunks_exact_mut(m) {
            for &i in order {
                let v = self.structure.row_index(i, record);
                record[i] = draw_categorical(self.cpts[i].row(v), rng.random::<f64>());
            }
        }
        Dataset::from_flat_unchecked(self.schema(), values)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let nodes = (0..self.node_count())
            .map(|i| ModelNode {
                name: self.names[i].clone(),
                cardinality: self.structure.cardinalities()[i],
                parents: self
                    .structure
                    .parents(i)
                    .iter()
                    .map(|&p| self.names[p].clone())
                    .collect(),
                cpt: self.cpts[i].rows().map(<[f64]>::to_vec).collect(),
            })
            .collect();
        ModelFile { nodes }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_model_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        file.into_network()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BayesianNetwork::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn draw_categorical(row: &[f64], u: f64) -> u32 {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j as u32;
        }
    }
    // rounding left the cumulative sum just under 1; take the last value
    // with positive mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1) as u32
}

pub(crate) fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

/// On-disk model format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub nodes: Vec<ModelNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelNode {
    pub name: String,
    pub cardinality: u32,
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn into_network(self) -> Result<BayesianNetwork> {
        let mut index = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if index.insert(node.name.clone(), i).is_some() {
                return Err(Error::ModelFormat(format!(
                    "duplicate node name {:?}",
                    node.name
                )));
            }
        }
        let mut parents = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let pa = node
                .parents
                .iter()
                .map(|name| {
                    index.get(name).copied().ok_or_else(|| {
                        Error::ModelFormat(format!(
                            "node {:?} names unknown parent {name:?}",
                            node.name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            parents.push(pa);
        }
        let eta = parents.iter().map(Vec::len).max().unwrap_or(0);
        let cards = self.nodes.iter().map(|n| n.cardinality).collect();
        let structure = NetworkStructure::new(cards, parents, eta)?;
        let mut names = Vec::with_capacity(self.nodes.len());
        let mut cpts = Vec::with_capacity(self.nodes.len());
        for node in self.nodes {
            let cpt = Cpt::new(node.cardinality as usize, &node.cpt)
                .map_err(|e| Error::ModelFormat(format!("node {:?}: {e}", node.name)))?;
            names.push(node.name);
            cpts.push(cpt);
        }
        BayesianNetwork::new(structure, names, cpts, Some(DEFAULT_PROBABILITY_FLOOR))
    }
}
