#ifndef BNTRACE_H
#define BNTRACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BntStatus {
  BNT_STATUS_OK = 0,
  BNT_STATUS_NULL_POINTER = 1,
  BNT_STATUS_INVALID_ARGUMENT = 2,
  BNT_STATUS_PARSE = 3,
  BNT_STATUS_INVALID_DATASET = 4,
  BNT_STATUS_INVALID_MODEL = 5,
  BNT_STATUS_IO = 6,
  BNT_STATUS_RUNTIME = 7,
  BNT_STATUS_PANIC = 8,
} BntStatus;

// Opaque categorical dataset.
typedef struct BntDataset BntDataset;

// Opaque Bayesian network.
typedef struct BntNetwork BntNetwork;

// Message for the last failed call on this thread, or NULL after a
// success. Valid until the next call into this library on the same thread.
const char *bnt_last_error_message(void);

// # Safety
// `path` must be a NUL-terminated string; `schema_path` may be NULL.
// `out` must be writable.
enum BntStatus bnt_dataset_load_csv(const char *path,
                                    const char *schema_path,
                                    struct BntDataset **out);

// Builds a dataset from `rows * cols` row-major values. `cardinalities`
// (length `cols`) may be NULL to infer them from the data. Attributes are
// named `x0`, `x1`, ...
//
// # Safety
// `values` must hold `rows * cols` entries; `cardinalities`, when not NULL,
// must hold `cols` entries. `out` must be writable.
enum BntStatus bnt_dataset_from_values(const uint32_t *values,
                                       size_t rows,
                                       size_t cols,
                                       const uint32_t *cardinalities,
                                       struct BntDataset **out);

// # Safety
// `dataset` must be NULL or a handle from this library not yet freed.
void bnt_dataset_free(struct BntDataset *dataset);

// Row count, or 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t bnt_dataset_rows(const struct BntDataset *dataset);

// Attribute count, or 0 for NULL.
//
// # Safety
// `dataset` must be NULL or a live handle.
size_t bnt_dataset_cols(const struct BntDataset *dataset);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum BntStatus bnt_network_load(const char *path, struct BntNetwork **out);

// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum BntStatus bnt_network_from_json(const char *json, struct BntNetwork **out);

// Serializes the model; free the string with [`bnt_string_free`].
//
// # Safety
// `network` must be a live handle and `out` writable.
enum BntStatus bnt_network_to_json(const struct BntNetwork *network, char **out);

// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void bnt_string_free(char *s);

// # Safety
// `network` must be NULL or a handle from this library not yet freed.
void bnt_network_free(struct BntNetwork *network);

// Node count, or 0 for NULL.
//
// # Safety
// `network` must be NULL or a live handle.
size_t bnt_network_node_count(const struct BntNetwork *network);

// # Safety
// `network` must be a live handle and `out` writable.
enum BntStatus bnt_network_complexity(const struct BntNetwork *network, uint64_t *out);

// Natural-log probability of one record (`len` values); negative infinity
// when a factor is zero.
//
// # Safety
// `record` must hold `len` values, `network` must be live, `out` writable.
enum BntStatus bnt_network_log_joint(const struct BntNetwork *network,
                                     const uint32_t *record,
                                     size_t len,
                                     double *out);

// Draws `count` records by ancestral sampling.
//
// # Safety
// `network` must be live and `out` writable.
enum BntStatus bnt_network_sample(const struct BntNetwork *network,
                                  size_t count,
                                  uint64_t seed,
                                  struct BntDataset **out);

// Learns a structure with at most `eta` parents per node and posterior-mean
// parameters with Dirichlet pseudo-count `prior`.
//
// # Safety
// `dataset` must be live and `out` writable.
enum BntStatus bnt_learn(const struct BntDataset *dataset,
                         size_t eta,
                         double prior,
                         struct BntNetwork **out);

// Fits the attacker's null model: the released structure with parameters
// estimated on `reference`.
//
// # Safety
// Handles must be live and `out` writable.
enum BntStatus bnt_fit_population_model(const struct BntDataset *reference,
                                        const struct BntNetwork *released,
                                        double prior,
                                        struct BntNetwork **out);

// Likelihood-ratio statistic of one record: log probability under the
// population model minus log probability under the released model.
//
// # Safety
// Handles must be live, `record` must hold `len` values, `out` writable.
enum BntStatus bnt_lr_statistic(const struct BntNetwork *population,
                                const struct BntNetwork *released,
                                const uint32_t *record,
                                size_t len,
                                double *out);

// Statistics for every row of `dataset`, written to `out` which must have
// room for `out_len >= rows` values.
//
// # Safety
// Handles must be live and `out` must hold `out_len` writable values.
enum BntStatus bnt_statistics(const struct BntNetwork *population,
                              const struct BntNetwork *released,
                              const struct BntDataset *dataset,
                              double *out,
                              size_t out_len);

// AUC of the threshold sweep separating pool statistics from population
// statistics (ties count one half).
//
// # Safety
// The arrays must hold the stated number of values; `out` writable.
enum BntStatus bnt_empirical_auc(const double *pool,
                                 size_t pool_len,
                                 const double *population,
                                 size_t population_len,
                                 double *out);

// # Safety
// `out` must be writable.
enum BntStatus bnt_bound_power(double complexity, double pool_size, double alpha, double *out);

// # Safety
// `out` must be writable.
enum BntStatus bnt_bound_auc(double complexity, double pool_size, double *out);

// # Safety
// `out` must be writable.
enum BntStatus bnt_gdp_delta(double epsilon, double mu, double *out);

// # Safety
// `out` must be writable.
enum BntStatus bnt_gdp_power_cap(double mu, double alpha, double *out);

// # Safety
// `out` must be writable.
enum BntStatus bnt_nb_variance(uint64_t attributes, double pool_size, double p1, double *out);

#endif  /* BNTRACE_H */
