#ifndef ICP_H
#define ICP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ICP_METHOD_FULL 0

#define ICP_METHOD_SPLIT 1

#define ICP_METHOD_JACKKNIFE 2

#define ICP_REGRESSOR_OLS 0

#define ICP_REGRESSOR_LASSO 1

#define ICP_REGRESSOR_KERNEL 2

#define ICP_SIMILARITY_PERCENTILE 0

#define ICP_SIMILARITY_COSINE 1

#define ICP_CONTROLS_PERTURB 0

#define ICP_CONTROLS_GAUSSIAN_MIMIC 1

#define ICP_PATH_STANDARD 0

#define ICP_PATH_RELEVANT 1

#define ICP_PATH_RELEVANT_SIMULATED 2

typedef enum IcpStatus {
  ICP_STATUS_OK = 0,
  ICP_STATUS_NULL_POINTER = 1,
  ICP_STATUS_INVALID_ARGUMENT = 2,
  ICP_STATUS_CONFIG_ERROR = 3,
  ICP_STATUS_DATA_ERROR = 4,
  ICP_STATUS_IO_ERROR = 5,
  ICP_STATUS_PANIC = 6,
} IcpStatus;

/**
 * Opaque training set.
 */
typedef struct IcpDataset IcpDataset;

typedef struct IcpConfig {
  double alpha;
  double gamma;
  double rho;
  double noise_scale;
  double grid_expansion;
  uint64_t seed;
  uint32_t min_relevant;
  uint32_t grid_points;
  uint32_t lasso_folds;
  /**
   * One of the `ICP_METHOD_*` constants.
   */
  int32_t method;
  /**
   * One of the `ICP_REGRESSOR_*` constants.
   */
  int32_t regressor;
  /**
   * One of the `ICP_SIMILARITY_*` constants.
   */
  int32_t similarity;
  /**
   * One of the `ICP_CONTROLS_*` constants.
   */
  int32_t control_mode;
} IcpConfig;

typedef struct IcpInterval {
  double point;
  double lo;
  double up;
  /**
   * One of the `ICP_PATH_*` constants.
   */
  int32_t path;
  int32_t method;
  int32_t regressor;
  /**
   * Nonzero when full conformal accepted no trial value.
   */
  int32_t degenerate;
} IcpInterval;

typedef struct IcpMetrics {
  double a_dist;
  /**
   * Meaningful only when `b_defined` is nonzero.
   */
  double b_pct;
  double c_len;
  /**
   * Meaningful only when `d_defined` is nonzero.
   */
  double d_norm;
  int32_t b_defined;
  int32_t d_defined;
  int32_t covered;
} IcpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *icp_version(void);

/**
 * Message for the most recent failure on this thread, or NULL.
 */
const char *icp_last_error_message(void);

/**
 * Fills `out` with the library defaults.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `IcpConfig`.
 */
enum IcpStatus icp_config_default(struct IcpConfig *out);

/**
 * Copies a row-major `n × p` feature matrix and `n` heads into a new dataset.
 *
 * # Safety
 * `x` must point to `n * p` doubles, `y` to `n` doubles, and `out` to a
 * writable handle slot.
 */
enum IcpStatus icp_dataset_new(const double *x,
                               const double *y,
                               size_t n,
                               size_t p,
                               struct IcpDataset **out);

/**
 * Loads a CSV file; `head` names the response column.
 *
 * # Safety
 * `path` and `head` must be NUL-terminated strings; `out` a writable slot.
 */
enum IcpStatus icp_dataset_load_csv(const char *path, const char *head, struct IcpDataset **out);

/**
 * Releases a dataset. NULL is ignored.
 *
 * # Safety
 * `d` must come from this library and not be used afterwards.
 */
void icp_dataset_free(struct IcpDataset *d);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t icp_dataset_rows(const struct IcpDataset *d);

/**
 * Number of feature columns, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t icp_dataset_cols(const struct IcpDataset *d);

/**
 * Computes the standard, relevant and relevant-plus-controls intervals for
 * the query `x0` (length `p`), written to `out[0..3]` in that order.
 * `n_relevant` may be NULL; otherwise it receives the selection size.
 *
 * # Safety
 * `d` must be a live handle, `x0` must point to `p` doubles, `cfg` to one
 * config, `out` to three writable intervals.
 */
enum IcpStatus icp_run(const struct IcpDataset *d,
                       const double *x0,
                       size_t p,
                       const struct IcpConfig *cfg,
                       uint64_t query_index,
                       struct IcpInterval *out,
                       size_t *n_relevant);

/**
 * Scores an interval against the realized head `y0`.
 *
 * # Safety
 * `interval` must point to one interval and `out` to writable metrics.
 */
enum IcpStatus icp_score(const struct IcpInterval *interval, double y0, struct IcpMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICP_H */
