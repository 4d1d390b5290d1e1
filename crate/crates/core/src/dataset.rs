// SPDX-License-Identifier: Apache-2.0
//! Integer-coded categorical datasets.
//!
//! A [`Dataset`] is an immutable `n x m` table whose column `i` takes values in
//! `0..cardinalities[i]`. Rows are stored contiguously, row-major.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Attribute names plus the size of each attribute's value space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub names: Vec<String>,
    pub cardinalities: Vec<u32>,
}

impl Schema {
    pub fn new(names: Vec<String>, cardinalities: Vec<u32>) -> Result<Self> {
        if names.len() != cardinalities.len() {
            return Err(Error::InvalidDataset(format!(
                "{} attribute names but {} cardinalities",
                names.len(),
                cardinalities.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::InvalidDataset("no attributes".into()));
        }
        if let Some((i, &c)) = cardinalities.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::InvalidDataset(format!(
                "attribute {} ({}) has cardinality {c}; at least 2 is required",
                i, names[i]
            )));
        }
        Ok(Schema {
            names,
            cardinalities,
        })
    }

    /// Binary schema with names `x0, x1, ...`.
    pub fn binary(m: usize) -> Self {
        Schema {
            names: (0..m).map(|i| format!("x{i}")).collect(),
            cardinalities: vec![2; m],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Parses the sidecar format: one `name cardinality` pair per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut cards = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(card), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    message: format!("expected `name cardinality`, got {line:?}"),
                    row: lineno + 1,
                    column: 1,
                });
            };
            let card: u32 = card.parse().map_err(|_| Error::Parse {
                message: format!("non-integer cardinality {card:?}"),
                row: lineno + 1,
                column: 2,
            })?;
            names.push(name.to_string());
            cards.push(card);
        }
        Schema::new(names, cards)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text)
    }

    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        for (name, card) in self.names.iter().zip(&self.cardinalities) {
            let _ = writeln!(out, "{name} {card}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    schema: Schema,
    values: Vec<u32>,
    rows: usize,
}

impl Dataset {
    /// Builds a dataset from row vectors, checking every value against the
    /// schema.
    pub fn new(schema: Schema, records: &[Vec<u32>]) -> Result<Self> {
        let m = schema.len();
        let mut values = Vec::with_capacity(records.len() * m);
        for (r, rec) in records.iter().enumerate() {
            if rec.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "record {r} has {} values, expected {m}",
                    rec.len()
                )));
            }
            values.extend_from_slice(rec);
        }
        Dataset::from_flat(schema, values)
    }

    /// Builds a dataset from row-major values.
    pub fn from_flat(schema: Schema, values: Vec<u32>) -> Result<Self> {
        let m = schema.len();
        if !values.len().is_multiple_of(m) {
            return Err(Error::InvalidDataset(format!(
                "{} values do not form rows of width {m}",
                values.len()
            )));
        }
        for (k, &v) in values.iter().enumerate() {
            let col = k % m;
            if v >= schema.cardinalities[col] {
                return Err(Error::InvalidDataset(format!(
                    "value {v} at record {}, attribute {} exceeds cardinality {}",
                    k / m,
                    schema.names[col],
                    schema.cardinalities[col]
                )));
            }
        }
        let rows = values.len() / m;
        Ok(Dataset {
            schema,
            values,
            rows,
        })
    }

    /// Caller guarantees every value is in range.
    pub(crate) fn from_flat_unchecked(schema: Schema, values: Vec<u32>) -> Self {
        let rows = values.len() / schema.len();
        debug_assert_eq!(rows * schema.len(), values.len());
        Dataset {
            schema,
            values,
            rows,
        }
    }

    pub fn empty(schema: Schema) -> Self {
        Dataset {
            schema,
            values: Vec::new(),
            rows: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.schema.names
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.schema.cardinalities
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn attribute_count(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, r: usize) -> &[u32] {
        let m = self.attribute_count();
        &self.values[r * m..(r + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.values.chunks_exact(self.attribute_count())
    }

    pub fn value(&self, r: usize, c: usize) -> u32 {
        self.values[r * self.attribute_count() + c]
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.attribute_count());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset::from_flat_unchecked(self.schema.clone(), values)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.schema.names.join(",");
        out.push('\n');
        for row in self.rows() {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a dataset from a CSV file. When `schema_path` is given, the sidecar
/// fixes attribute cardinalities; otherwise each column's cardinality is its
/// maximum observed value plus one (never below 2).
pub fn load_csv(path: &Path, schema_path: Option<&Path>) -> Result<Dataset> {
    let schema = schema_path.map(Schema::load).transpose()?;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema.as_ref())
}

pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => {
            return Err(Error::Parse {
                message: "empty file".into(),
                row: 0,
                column: 0,
            })
        }
        Some(h) => h.map_err(|e| csv_error(e, 0))?,
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let m = names.len();
    if names.iter().any(String::is_empty) {
        let column = names.iter().position(String::is_empty).unwrap_or(0) + 1;
        return Err(Error::Parse {
            message: "empty attribute name in header".into(),
            row: 0,
            column,
        });
    }
    if let Some(s) = schema {
        if s.names != names {
            return Err(Error::InvalidDataset(format!(
                "schema attributes {:?} do not match header {:?}",
                s.names, names
            )));
        }
    }

    let mut values = Vec::new();
    let mut maxima = vec![0u32; m];
    let mut row = 0usize;
    for rec in records {
        row += 1;
        let rec = rec.map_err(|e| csv_error(e, row))?;
        if rec.len() != m {
            return Err(Error::Parse {
                message: format!("ragged row: {} cells, expected {m}", rec.len()),
                row,
                column: rec.len().min(m) + 1,
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    message: "missing value".into(),
                    row,
                    column: c + 1,
                });
            }
            let v: u32 = cell.parse().map_err(|_| Error::Parse {
                message: format!("non-integer value {cell:?}"),
                row,
                column: c + 1,
            })?;
            maxima[c] = maxima[c].max(v);
            values.push(v);
        }
    }

    let schema = match schema {
        Some(s) => {
            for (c, &mx) in maxima.iter().enumerate() {
                if row > 0 && mx >= s.cardinalities[c] {
                    return Err(Error::InvalidDataset(format!(
                        "attribute {} has value {mx} but schema cardinality {}",
                        names[c], s.cardinalities[c]
                    )));
                }
            }
            s.clone()
        }
        None => {
            if row == 0 {
                return Err(Error::Parse {
                    message: "empty file: no data rows and no schema".into(),
                    row: 0,
                    column: 0,
                });
            }
            Schema::new(names, maxima.iter().map(|&mx| (mx + 1).max(2)).collect())?
        }
    };
    Ok(Dataset::from_flat_unchecked(schema, values))
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        message: e.to_string(),
        row,
        column: 0,
    }
}

/// Sizes and seed for a pool/reference split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub pool_size: usize,
    pub reference_size: usize,
    pub seed: u64,
}

/// Index form of [`split`]: disjoint uniformly-random index sets plus the
/// rows assigned to neither side, each in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub pool: Vec<usize>,
    pub reference: Vec<usize>,
    pub rest: Vec<usize>,
}

pub fn split_indices(row_count: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    if spec.pool_size == 0 || spec.reference_size == 0 {
        return Err(Error::InvalidArgument(
            "pool and reference sizes must be positive".into(),
        ));
    }
    let needed = spec.pool_size + spec.reference_size;
    if needed > row_count {
        return Err(Error::InvalidArgument(format!(
            "pool ({}) + reference ({}) exceeds population size {row_count}",
            spec.pool_size, spec.reference_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..row_count).collect();
    order.shuffle(&mut rng);
    let mut pool = order[..spec.pool_size].to_vec();
    let mut reference = order[spec.pool_size..needed].to_vec();
    let mut rest = order[needed..].to_vec();
    pool.sort_unstable();
    reference.sort_unstable();
    rest.sort_unstable();
    Ok(SplitIndices {
        pool,
        reference,
        rest,
    })
}

/// Draws disjoint pool and reference datasets uniformly at random.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(dataset.row_count(), spec)?;
    Ok((dataset.select(&idx.pool), dataset.select(&idx.reference)))
}

/// Which attributes a selection bias acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BiasTarget {
    /// Product of per-attribute selection probabilities over every attribute.
    #[default]
    AllAttributes,
    /// Only the given attribute influences selection.
    Attribute(usize),
}

/// Rejection-sampling selection bias against attribute value 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasSpec {
    pub bias: f64,
    pub target: BiasTarget,
    /// Total candidate draws allowed before giving up.
    pub max_attempts: u64,
}

impl BiasSpec {
    pub fn new(bias: f64) -> Self {
        BiasSpec {
            bias,
            target: BiasTarget::AllAttributes,
            max_attempts: 10_000_000,
        }
    }

    /// Probability that a candidate record is accepted: a factor of
    /// `1 - bias` for every targeted attribute equal to 1.
    pub fn acceptance_probability(&self, record: &[u32]) -> f64 {
        let ones = match self.target {
            BiasTarget::AllAttributes => record.iter().filter(|&&v| v == 1).count(),
            BiasTarget::Attribute(i) => usize::from(record[i] == 1),
        };
        (1.0 - self.bias).powi(ones as i32)
    }

    fn validate(&self, dataset: &Dataset) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(Error::InvalidArgument(format!(
                "bias {} outside [0, 1]",
                self.bias
            )));
        }
        let cards = dataset.cardinalities();
        let targeted: Vec<usize> = match self.target {
            BiasTarget::AllAttributes => (0..cards.len()).collect(),
            BiasTarget::Attribute(i) if i < cards.len() => vec![i],
            BiasTarget::Attribute(i) => {
                return Err(Error::InvalidArgument(format!(
                    "bias attribute {i} out of range"
                )))
            }
        };
        if let Some(&i) = targeted.iter().find(|&&i| cards[i] != 2) {
            return Err(Error::InvalidArgument(format!(
                "biased sampling needs binary attributes; {} has cardinality {}",
                dataset.attribute_names()[i],
                cards[i]
            )));
        }
        Ok(())
    }
}

/// Selects `pool_size` distinct rows by rejection sampling: a uniformly
/// chosen, not yet accepted row is kept with
/// [`BiasSpec::acceptance_probability`]. Returned indices are ascending.
pub fn biased_sample_indices(
    dataset: &Dataset,
    pool_size: usize,
    spec: &BiasSpec,
    seed: u64,
) -> Result<Vec<usize>> {
    spec.validate(dataset)?;
    if pool_size > dataset.row_count() {
        return Err(Error::InvalidArgument(format!(
            "pool size {pool_size} exceeds population size {}",
            dataset.row_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..dataset.row_count()).collect();
    let mut accepted = Vec::with_capacity(pool_size);
    let mut attempts = 0u64;
    while accepted.len() < pool_size {
        if attempts >= spec.max_attempts {
            return Err(Error::BudgetExhausted {
                attempts,
                detail: format!("accepted {} of {pool_size} records", accepted.len()),
            });
        }
        attempts += 1;
        let pos = rng.random_range(0..remaining.len());
        let p = spec.acceptance_probability(dataset.row(remaining[pos]));
        if p >= 1.0 || rng.random::<f64>() < p {
            accepted.push(remaining.swap_remove(pos));
        }
    }
    accepted.sort_unstable();
    Ok(accepted)
}

pub fn biased_sample(
    dataset: &Dataset,
    pool_size: usize,
    spec: &BiasSpec,
    seed: u64,
) -> Result<Dataset> {
    let idx = biased_sample_indices(dataset, pool_size, spec, seed)?;
    Ok(dataset.select(&idx))
}
