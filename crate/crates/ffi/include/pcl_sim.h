#ifndef PCL_SIM_H
#define PCL_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PclStatus {
  PCL_STATUS_OK = 0,
  PCL_STATUS_NULL_POINTER = 1,
  PCL_STATUS_INVALID_ARGUMENT = 2,
  PCL_STATUS_CONFIG = 3,
  PCL_STATUS_IO = 4,
  PCL_STATUS_NON_FINITE = 5,
  PCL_STATUS_UNDEFINED_METRIC = 6,
  PCL_STATUS_OUT_OF_RANGE = 7,
  PCL_STATUS_INTERNAL = 8,
  PCL_STATUS_PANIC = 9,
} PclStatus;

/**
 * A finished run.
 */
typedef struct PclTrace PclTrace;

/**
 * Numeric view of one step. Missing values are NaN.
 */
typedef struct PclRecord {
  uint64_t step;
  double cumulative_sim_time_s;
  double train_reward_pre_filter;
  double train_reward_post_filter;
  double effective_ratio;
  double grad_norm;
  double value_ev;
  uint64_t wasted_rollouts;
  double mean_staleness;
  double pi_ref_difficulty_of_selected;
  double mean_success_analytic;
} PclRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pcl_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *pcl_version(void);

/**
 * Parses a TOML run configuration and runs it to completion.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` must be writable.
 */
enum PclStatus pcl_run_from_toml(const char *config_toml, struct PclTrace **out);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `trace` must come from [`pcl_run_from_toml`] and not be used afterwards.
 */
void pcl_trace_free(struct PclTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum PclStatus pcl_trace_len(const struct PclTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum PclStatus pcl_trace_record(const struct PclTrace *trace, size_t index, struct PclRecord *out);

/**
 * Final mean success, total rollouts generated and total wasted.
 *
 * # Safety
 * `trace` must be a live handle; each out pointer must be null or writable.
 */
enum PclStatus pcl_trace_summary(const struct PclTrace *trace,
                                 double *final_mean_success,
                                 uint64_t *generated_rollouts,
                                 uint64_t *wasted_rollouts);

/**
 * 1 if selection starved before the budget ran out, else 0.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum PclStatus pcl_trace_starved(const struct PclTrace *trace, int32_t *out);

/**
 * Writes the trace in the run CSV schema.
 *
 * # Safety
 * `trace` must be a live handle; `path` a NUL-terminated string.
 */
enum PclStatus pcl_trace_write_csv(const struct PclTrace *trace, const char *path);

/**
 * Simulated seconds to generate responses of the given lengths.
 *
 * # Safety
 * `lengths` must point to `len` values; `out` must be writable.
 */
enum PclStatus pcl_generation_time(const uint32_t *lengths,
                                   size_t len,
                                   double per_stream_rate,
                                   uint32_t capacity,
                                   double *out);

/**
 * `1 - Var(truth - pred) / Var(truth)`.
 *
 * # Safety
 * `truths` and `preds` must each point to `len` values; `out` must be writable.
 */
enum PclStatus pcl_explained_variance(const double *truths,
                                      const double *preds,
                                      size_t len,
                                      double *out);

/**
 * `p (1 - p)`, the expected squared advantage of a binary reward.
 *
 * # Safety
 * `out` must be writable.
 */
enum PclStatus pcl_expected_sq_advantage(double p, double *out);

/**
 * Writes the indices of the `m` scores closest to `target` into `out`.
 *
 * # Safety
 * `scores` must point to `len` values and `out` to `m` writable slots.
 */
enum PclStatus pcl_greedy_downsample(const double *scores,
                                     size_t len,
                                     double target,
                                     size_t m,
                                     size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCL_SIM_H */
