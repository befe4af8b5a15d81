#ifndef FESC_H
#define FESC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum FescStatus {
  FESC_STATUS_OK = 0,
  FESC_STATUS_NULL_POINTER = 1,
  FESC_STATUS_INVALID_ARGUMENT = 2,
  FESC_STATUS_IO = 3,
  /**
   * Eigen-solver, SVM convergence or graph connectivity failure.
   */
  FESC_STATUS_NUMERICAL = 4,
  /**
   * No consensus parameters produced a feature set.
   */
  FESC_STATUS_INFEASIBLE = 5,
  FESC_STATUS_PANIC = 6,
} FescStatus;

typedef enum FescKernel {
  FESC_KERNEL_LINEAR = 0,
  FESC_KERNEL_RBF = 1,
} FescKernel;

/**
 * Pipeline configuration.
 */
typedef struct FescConfig FescConfig;

/**
 * Feature matrix loaded from CSV.
 */
typedef struct FescFeatures FescFeatures;

/**
 * Trained SVM.
 */
typedef struct FescSvm FescSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fesc_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fesc_version(void);

/**
 * Number of frequency bins [`fesc_msc`] produces for trials of `len` samples.
 */
size_t fesc_msc_bins(size_t len);

/**
 * Magnitude-squared coherence between paired trials.
 *
 * `eeg` and `emg` hold `n_trials * len` samples, trial-major. `freqs_out` and
 * `msc_out` receive `fesc_msc_bins(len)` values each; `freqs_out` may be null.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes.
 */
enum FescStatus fesc_msc(const double *eeg,
                         const double *emg,
                         size_t n_trials,
                         size_t len,
                         double sample_rate_hz,
                         double *freqs_out,
                         double *msc_out);

/**
 * Consensus feature selection over `n` pooled points (`points` holds
 * `n * 2` values, class1 mean then class2 mean per feature).
 *
 * On success `indices_out` (capacity `m`) receives the selected feature
 * indices in ascending order and `count_out` their number. An infeasible
 * combination returns [`FescStatus::Infeasible`].
 *
 * # Safety
 * `points` must hold `2 * n` values and `indices_out` at least `m` slots.
 */
enum FescStatus fesc_select_features(const double *points,
                                     size_t n,
                                     size_t m,
                                     double sigma,
                                     size_t nu,
                                     uint64_t seed,
                                     size_t *indices_out,
                                     size_t *count_out);

/**
 * Trains an SVM on `n_rows x n_cols` row-major data with labels 1 or 2.
 *
 * # Safety
 * `rows` must hold `n_rows * n_cols` values, `labels` `n_rows` values and
 * `out` must be writable.
 */
enum FescStatus fesc_svm_train(const double *rows,
                               const uint8_t *labels,
                               size_t n_rows,
                               size_t n_cols,
                               enum FescKernel kernel,
                               double c,
                               struct FescSvm **out);

/**
 * Predicts labels (1 or 2) for `n_rows x n_cols` row-major data.
 *
 * # Safety
 * `model` must come from [`fesc_svm_train`]; buffers must have the stated sizes.
 */
enum FescStatus fesc_svm_predict(const struct FescSvm *model,
                                 const double *rows,
                                 size_t n_rows,
                                 size_t n_cols,
                                 uint8_t *labels_out);

/**
 * Number of support vectors of a trained model, 0 for null.
 *
 * # Safety
 * `model` must be null or come from [`fesc_svm_train`].
 */
size_t fesc_svm_support_vectors(const struct FescSvm *model);

/**
 * # Safety
 * `model` must be null or come from [`fesc_svm_train`], and not be used afterwards.
 */
void fesc_svm_free(struct FescSvm *model);

/**
 * Default pipeline configuration.
 */
struct FescConfig *fesc_config_default(void);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum FescStatus fesc_config_from_file(const char *path, struct FescConfig **out);

/**
 * # Safety
 * `cfg` must come from this library.
 */
enum FescStatus fesc_config_set_seed(struct FescConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must come from this library.
 */
enum FescStatus fesc_config_set_kernel(struct FescConfig *cfg, enum FescKernel kernel);

/**
 * # Safety
 * `cfg` must be null or come from this library, and not be used afterwards.
 */
void fesc_config_free(struct FescConfig *cfg);

/**
 * Reads a feature-matrix CSV as written by `fesc features`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum FescStatus fesc_features_read(const char *path, struct FescFeatures **out);

/**
 * # Safety
 * `fm` must be null or come from [`fesc_features_read`].
 */
size_t fesc_features_rows(const struct FescFeatures *fm);

/**
 * # Safety
 * `fm` must be null or come from [`fesc_features_read`].
 */
size_t fesc_features_cols(const struct FescFeatures *fm);

/**
 * # Safety
 * `fm` must be null or come from [`fesc_features_read`], and not be used afterwards.
 */
void fesc_features_free(struct FescFeatures *fm);

/**
 * Nested cross-validation on `features` with `cfg`, writing `report.json`,
 * the grid CSVs and `selected_features.csv` into `out_dir`. Holdout
 * accuracy is stored in `holdout_accuracy_out` when it is not null.
 *
 * # Safety
 * Handles must come from this library; `out_dir` must be a NUL-terminated string.
 */
enum FescStatus fesc_run(const struct FescFeatures *features,
                         const struct FescConfig *cfg,
                         const char *out_dir,
                         double *holdout_accuracy_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FESC_H */
