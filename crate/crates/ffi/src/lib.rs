// SPDX-License-Identifier: Apache-2.0
//! C interface to `bntrace`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`BntStatus`]; on failure [`bnt_last_error_message`] describes the error
//! for the calling thread. Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bntrace::attack;
use bntrace::dataset::{self, Dataset, Schema};
use bntrace::learn::{self, PriorSpec, StructureSearchConfig};
use bntrace::network::BayesianNetwork;
use bntrace::theory;
use bntrace::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BntStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    InvalidDataset = 4,
    InvalidModel = 5,
    Io = 6,
    Runtime = 7,
    Panic = 8,
}

/// Opaque categorical dataset.
pub struct BntDataset {
    inner: Dataset,
}

/// Opaque Bayesian network.
pub struct BntNetwork {
    inner: BayesianNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BntStatus {
    match e {
        Error::Io { .. } => BntStatus::Io,
        Error::Parse { .. } => BntStatus::Parse,
        Error::InvalidDataset(_) => BntStatus::InvalidDataset,
        Error::InvalidNetwork(_) | Error::Cycle(_) | Error::ModelFormat(_) => {
            BntStatus::InvalidModel
        }
        Error::InvalidArgument(_) | Error::Config(_) => BntStatus::InvalidArgument,
        Error::BudgetExhausted { .. } => BntStatus::Runtime,
        Error::Split { source, .. } => status_of(source),
    }
}

struct Failure(BntStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BntStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BntStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BntStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            BntStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BntStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bnt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string; `schema_path` may be NULL.
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_dataset_load_csv(
    path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut BntDataset,
) -> BntStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let schema = if schema_path.is_null() {
            None
        } else {
            Some(path_arg(schema_path, "schema path")?)
        };
        let inner = dataset::load_csv(&path, schema.as_deref())?;
        write_out(out, boxed(BntDataset { inner }))
    })
}

/// Builds a dataset from `rows * cols` row-major values. `cardinalities`
/// (length `cols`) may be NULL to infer them from the data. Attributes are
/// named `x0`, `x1`, ...
///
/// # Safety
/// `values` must hold `rows * cols` entries; `cardinalities`, when not NULL,
/// must hold `cols` entries. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_dataset_from_values(
    values: *const u32,
    rows: usize,
    cols: usize,
    cardinalities: *const u32,
    out: *mut *mut BntDataset,
) -> BntStatus {
    guard(|| {
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(BntStatus::InvalidArgument, "rows * cols overflows".into()))?;
        if cols == 0 {
            return Err(Failure(
                BntStatus::InvalidArgument,
                "need at least one column".into(),
            ));
        }
        let values = slice_arg(values, total, "values")?.to_vec();
        let cards = if cardinalities.is_null() {
            (0..cols)
                .map(|c| {
                    (0..rows)
                        .map(|r| values[r * cols + c])
                        .max()
                        .map_or(2, |m| (m + 1).max(2))
                })
                .collect()
        } else {
            slice_arg(cardinalities, cols, "cardinalities")?.to_vec()
        };
        let names = (0..cols).map(|i| format!("x{i}")).collect();
        let inner = Dataset::from_flat(Schema::new(names, cards)?, values)?;
        write_out(out, boxed(BntDataset { inner }))
    })
}

/// # Safety
/// `dataset` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bnt_dataset_free(dataset: *mut BntDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bnt_dataset_rows(dataset: *const BntDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.row_count())
}

/// Attribute count, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bnt_dataset_cols(dataset: *const BntDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.attribute_count())
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_load(
    path: *const c_char,
    out: *mut *mut BntNetwork,
) -> BntStatus {
    guard(|| {
        let inner = BayesianNetwork::load(&path_arg(path, "path")?)?;
        write_out(out, boxed(BntNetwork { inner }))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_from_json(
    json: *const c_char,
    out: *mut *mut BntNetwork,
) -> BntStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(BntStatus::InvalidArgument, "json is not UTF-8".into()))?;
        let inner = BayesianNetwork::from_json(text)?;
        write_out(out, boxed(BntNetwork { inner }))
    })
}

/// Serializes the model; free the string with [`bnt_string_free`].
///
/// # Safety
/// `network` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_to_json(
    network: *const BntNetwork,
    out: *mut *mut c_char,
) -> BntStatus {
    guard(|| {
        let net = ref_arg(network, "network")?;
        let json = CString::new(net.inner.to_json())
            .map_err(|_| Failure(BntStatus::Runtime, "model JSON contains NUL".into()))?;
        write_out(out, json.into_raw())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bnt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `network` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_free(network: *mut BntNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Node count, or 0 for NULL.
///
/// # Safety
/// `network` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_node_count(network: *const BntNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.inner.node_count())
}

/// # Safety
/// `network` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_complexity(
    network: *const BntNetwork,
    out: *mut u64,
) -> BntStatus {
    guard(|| write_out(out, ref_arg(network, "network")?.inner.complexity()))
}

/// Natural-log probability of one record (`len` values); negative infinity
/// when a factor is zero.
///
/// # Safety
/// `record` must hold `len` values, `network` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_log_joint(
    network: *const BntNetwork,
    record: *const u32,
    len: usize,
    out: *mut f64,
) -> BntStatus {
    guard(|| {
        let net = ref_arg(network, "network")?;
        let record = slice_arg(record, len, "record")?;
        write_out(out, net.inner.log_joint(record)?)
    })
}

/// Draws `count` records by ancestral sampling.
///
/// # Safety
/// `network` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_network_sample(
    network: *const BntNetwork,
    count: usize,
    seed: u64,
    out: *mut *mut BntDataset,
) -> BntStatus {
    guard(|| {
        let inner = ref_arg(network, "network")?.inner.sample(count, seed);
        write_out(out, boxed(BntDataset { inner }))
    })
}

/// Learns a structure with at most `eta` parents per node and posterior-mean
/// parameters with Dirichlet pseudo-count `prior`.
///
/// # Safety
/// `dataset` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_learn(
    dataset: *const BntDataset,
    eta: usize,
    prior: f64,
    out: *mut *mut BntNetwork,
) -> BntStatus {
    guard(|| {
        let data = &ref_arg(dataset, "dataset")?.inner;
        let prior = PriorSpec::new(prior)?;
        let structure = learn::learn_structure(data, &StructureSearchConfig::with_eta(eta))?;
        let inner = learn::learn_parameters(data, &structure, &prior)?;
        write_out(out, boxed(BntNetwork { inner }))
    })
}

/// Fits the attacker's null model: the released structure with parameters
/// estimated on `reference`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_fit_population_model(
    reference: *const BntDataset,
    released: *const BntNetwork,
    prior: f64,
    out: *mut *mut BntNetwork,
) -> BntStatus {
    guard(|| {
        let data = &ref_arg(reference, "reference")?.inner;
        let released = &ref_arg(released, "released")?.inner;
        let inner =
            attack::fit_population_model(data, released.structure(), &PriorSpec::new(prior)?)?;
        write_out(out, boxed(BntNetwork { inner }))
    })
}

/// Likelihood-ratio statistic of one record: log probability under the
/// population model minus log probability under the released model.
///
/// # Safety
/// Handles must be live, `record` must hold `len` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_lr_statistic(
    population: *const BntNetwork,
    released: *const BntNetwork,
    record: *const u32,
    len: usize,
    out: *mut f64,
) -> BntStatus {
    guard(|| {
        let pop = &ref_arg(population, "population")?.inner;
        let rel = &ref_arg(released, "released")?.inner;
        let record = slice_arg(record, len, "record")?;
        write_out(out, attack::lr_statistic(pop, rel, record)?.total)
    })
}

/// Statistics for every row of `dataset`, written to `out` which must have
/// room for `out_len >= rows` values.
///
/// # Safety
/// Handles must be live and `out` must hold `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn bnt_statistics(
    population: *const BntNetwork,
    released: *const BntNetwork,
    dataset: *const BntDataset,
    out: *mut f64,
    out_len: usize,
) -> BntStatus {
    guard(|| {
        let pop = &ref_arg(population, "population")?.inner;
        let rel = &ref_arg(released, "released")?.inner;
        let data = &ref_arg(dataset, "dataset")?.inner;
        if out_len < data.row_count() {
            return Err(Failure(
                BntStatus::InvalidArgument,
                format!("output holds {out_len} values, need {}", data.row_count()),
            ));
        }
        let stats = attack::statistics(pop, rel, data)?;
        if !stats.is_empty() {
            if out.is_null() {
                return Err(null("output pointer"));
            }
            ptr::copy_nonoverlapping(stats.as_ptr(), out, stats.len());
        }
        Ok(())
    })
}

/// AUC of the threshold sweep separating pool statistics from population
/// statistics (ties count one half).
///
/// # Safety
/// The arrays must hold the stated number of values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_empirical_auc(
    pool: *const f64,
    pool_len: usize,
    population: *const f64,
    population_len: usize,
    out: *mut f64,
) -> BntStatus {
    guard(|| {
        let pool = slice_arg(pool, pool_len, "pool")?;
        let others = slice_arg(population, population_len, "population")?;
        write_out(out, attack::empirical_roc(pool, others)?.auc)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_bound_power(
    complexity: f64,
    pool_size: f64,
    alpha: f64,
    out: *mut f64,
) -> BntStatus {
    guard(|| write_out(out, theory::bound_power(complexity, pool_size, alpha)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_bound_auc(
    complexity: f64,
    pool_size: f64,
    out: *mut f64,
) -> BntStatus {
    guard(|| write_out(out, theory::bound_auc(complexity, pool_size)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_gdp_delta(epsilon: f64, mu: f64, out: *mut f64) -> BntStatus {
    guard(|| write_out(out, theory::gdp_delta(epsilon, mu)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_gdp_power_cap(mu: f64, alpha: f64, out: *mut f64) -> BntStatus {
    guard(|| write_out(out, theory::gdp_power_cap(mu, alpha)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnt_nb_variance(
    attributes: u64,
    pool_size: f64,
    p1: f64,
    out: *mut f64,
) -> BntStatus {
    guard(|| {
        write_out(
            out,
            theory::naive_bayes_variance(attributes, pool_size, p1)?,
        )
    })
}
