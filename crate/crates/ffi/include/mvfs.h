#ifndef MVFS_H
#define MVFS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MvfsStatus {
  MVFS_STATUS_OK = 0,
  MVFS_STATUS_NULL_POINTER = 1,
  MVFS_STATUS_INVALID_ARGUMENT = 2,
  MVFS_STATUS_IO = 3,
  MVFS_STATUS_PARSE = 4,
  MVFS_STATUS_SHAPE = 5,
  MVFS_STATUS_INFEASIBLE = 6,
  MVFS_STATUS_PANIC = 7,
} MvfsStatus;

typedef enum MvfsMetric {
  MVFS_METRIC_CORRELATION = 0,
  MVFS_METRIC_MUTUAL_INFORMATION = 1,
} MvfsMetric;

/**
 * Opaque dataset handle.
 */
typedef struct MvfsDataset MvfsDataset;

/**
 * Opaque selection result handle.
 */
typedef struct MvfsSelection MvfsSelection;

typedef struct MvfsSelectorConfig {
  double lambda;
  double beta;
  bool enable_cross;
  bool enable_static;
  bool enable_dynamic;
  enum MvfsMetric static_metric;
  enum MvfsMetric dynamic_metric;
  size_t mi_bins;
  /**
   * Refresh the dynamic term after every pick instead of once per view.
   */
  bool greedy;
  bool signed_importance;
  /**
   * Use absolute cross-correlations in the cross term.
   */
  bool absolute_cross;
  size_t k;
} MvfsSelectorConfig;

typedef struct MvfsFeature {
  size_t view;
  size_t column;
} MvfsFeature;

typedef struct MvfsMetrics {
  double average_precision;
  double auc;
  double coverage;
  double ranking_loss;
} MvfsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mvfs_last_error(char *buf, size_t len);

/**
 * Loads a dataset from a manifest file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MvfsStatus mvfs_dataset_load_manifest(const char *path, struct MvfsDataset **out);

/**
 * Builds a dataset from row-major buffers. `views[v]` holds
 * `n_samples * view_dims[v]` values; `labels` holds `n_samples * n_labels`
 * entries in {0, 1}.
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths.
 */
enum MvfsStatus mvfs_dataset_from_buffers(size_t n_samples,
                                          size_t n_views,
                                          const size_t *view_dims,
                                          const double *const *views,
                                          size_t n_labels,
                                          const uint8_t *labels,
                                          struct MvfsDataset **out);

/**
 * Generates a planted-feature synthetic dataset.
 *
 * # Safety
 * `view_dims` must hold `n_views` entries; `out` must be writable.
 */
enum MvfsStatus mvfs_dataset_synthetic(size_t n_samples,
                                       size_t n_views,
                                       const size_t *view_dims,
                                       size_t n_labels,
                                       size_t n_planted,
                                       size_t n_duplicates,
                                       double noise_std,
                                       uint64_t seed,
                                       struct MvfsDataset **out);

/**
 * Z-scores every view in place.
 *
 * # Safety
 * `ds` must be a live handle.
 */
enum MvfsStatus mvfs_dataset_normalize(struct MvfsDataset *ds);

/**
 * Writes the sample, view, label and total feature counts. Any output
 * pointer may be null.
 *
 * # Safety
 * `ds` must be a live handle; non-null outputs must be writable.
 */
enum MvfsStatus mvfs_dataset_shape(const struct MvfsDataset *ds,
                                   size_t *n_samples,
                                   size_t *n_views,
                                   size_t *n_labels,
                                   size_t *total_features);

/**
 * Feature count of view `v`.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum MvfsStatus mvfs_dataset_view_dim(const struct MvfsDataset *ds, size_t v, size_t *out);

/**
 * Releases a dataset handle. Null is ignored.
 *
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void mvfs_dataset_free(struct MvfsDataset *ds);

struct MvfsSelectorConfig mvfs_selector_config_default(void);

/**
 * Runs the selector. The dataset must have been normalized.
 *
 * # Safety
 * `ds` must be a live handle, `config` readable and `out` writable.
 */
enum MvfsStatus mvfs_select(const struct MvfsDataset *ds,
                            const struct MvfsSelectorConfig *config,
                            struct MvfsSelection **out);

/**
 * Number of selected features; 0 for a null handle.
 *
 * # Safety
 * `sel` must be null or a live handle.
 */
size_t mvfs_selection_len(const struct MvfsSelection *sel);

/**
 * The `i`-th selected feature (selection order) and its importance.
 * `importance` may be null.
 *
 * # Safety
 * `sel` must be a live handle; `feature` writable; `importance` null or writable.
 */
enum MvfsStatus mvfs_selection_get(const struct MvfsSelection *sel,
                                   size_t i,
                                   struct MvfsFeature *feature,
                                   double *importance);

/**
 * Releases a selection handle. Null is ignored.
 *
 * # Safety
 * `sel` must be null or a handle not yet freed.
 */
void mvfs_selection_free(struct MvfsSelection *sel);

/**
 * Ranking metrics of row-major `n_samples x n_labels` scores against truth.
 *
 * # Safety
 * `scores` and `truth` must hold `n_samples * n_labels` entries; `out` writable.
 */
enum MvfsStatus mvfs_evaluate_metrics(const double *scores,
                                      const uint8_t *truth,
                                      size_t n_samples,
                                      size_t n_labels,
                                      struct MvfsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVFS_H */
