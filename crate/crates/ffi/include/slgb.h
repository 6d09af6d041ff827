#ifndef SLGB_H
#define SLGB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum SlgbStatus {
  SLGB_STATUS_OK = 0,
  SLGB_STATUS_NULL_POINTER = 1,
  SLGB_STATUS_INVALID_UTF8 = 2,
  SLGB_STATUS_IO = 3,
  SLGB_STATUS_PARSE = 4,
  SLGB_STATUS_EMPTY_DATASET = 5,
  SLGB_STATUS_INVALID_PARAMETER = 6,
  SLGB_STATUS_CONFIG = 7,
  SLGB_STATUS_PANIC = 8,
} SlgbStatus;

/**
 * Opaque dataset handle.
 */
typedef struct SlgbDataset SlgbDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct SlgbModel SlgbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *slgb_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void slgb_string_free(char *s);

/**
 * Loads a CSV, ARFF or KEEL file. `class_column` may be NULL for the last
 * column. Unlabeled rows carry `?` as their class.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum SlgbStatus slgb_dataset_load(const char *path,
                                  const char *class_column,
                                  struct SlgbDataset **out);

/**
 * Parses CSV text with a header row.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum SlgbStatus slgb_dataset_from_csv(const char *csv,
                                      const char *class_column,
                                      struct SlgbDataset **out);

/**
 * Number of rows.
 *
 * # Safety
 * `d` must be a live dataset handle; `out` must be writable.
 */
enum SlgbStatus slgb_dataset_len(const struct SlgbDataset *d, size_t *out);

/**
 * Number of attributes, excluding the class.
 *
 * # Safety
 * `d` must be a live dataset handle; `out` must be writable.
 */
enum SlgbStatus slgb_dataset_num_attributes(const struct SlgbDataset *d, size_t *out);

/**
 * Releases a dataset. NULL is ignored.
 *
 * # Safety
 * `d` must come from this library and not have been freed.
 */
void slgb_dataset_free(struct SlgbDataset *d);

/**
 * Fits a grey box. `config` names the configuration, e.g. `rf-part-rst`.
 * Rows of `data` without a label form the unlabeled set; `unlabeled` may add
 * more and may be NULL.
 *
 * # Safety
 * Handles must be live; `config` must be NUL-terminated; `out` must be
 * writable.
 */
enum SlgbStatus slgb_model_fit(const struct SlgbDataset *data,
                               const struct SlgbDataset *unlabeled,
                               const char *config,
                               uint64_t seed,
                               struct SlgbModel **out);

/**
 * Predicted class index for one row of `len` attribute values in schema
 * order. NaN marks a missing value; nominal values are category indices.
 *
 * # Safety
 * `m` must be live; `values` must point to `len` doubles; `out` must be
 * writable.
 */
enum SlgbStatus slgb_model_predict(const struct SlgbModel *m,
                                   const double *values,
                                   size_t len,
                                   size_t *out);

/**
 * Predicted class and the text of the deciding rule.
 *
 * # Safety
 * As for [`slgb_model_predict`]; `out_text` receives a string to release
 * with [`slgb_string_free`].
 */
enum SlgbStatus slgb_model_explain(const struct SlgbModel *m,
                                   const double *values,
                                   size_t len,
                                   size_t *out_class,
                                   char **out_text);

/**
 * Number of rules in the surrogate.
 *
 * # Safety
 * `m` must be live; `out` must be writable.
 */
enum SlgbStatus slgb_model_rule_count(const struct SlgbModel *m, size_t *out);

/**
 * Number of classes.
 *
 * # Safety
 * `m` must be live; `out` must be writable.
 */
enum SlgbStatus slgb_model_num_classes(const struct SlgbModel *m, size_t *out);

/**
 * Name of class `index`.
 *
 * # Safety
 * `m` must be live; `out` receives a string to release with
 * [`slgb_string_free`].
 */
enum SlgbStatus slgb_model_class_name(const struct SlgbModel *m, size_t index, char **out);

/**
 * The surrogate's rules, one per line.
 *
 * # Safety
 * `m` must be live; `out` receives a string to release with
 * [`slgb_string_free`].
 */
enum SlgbStatus slgb_model_render(const struct SlgbModel *m, char **out);

/**
 * Serializes a model.
 *
 * # Safety
 * `m` must be live; `out` receives a string to release with
 * [`slgb_string_free`].
 */
enum SlgbStatus slgb_model_to_json(const struct SlgbModel *m, char **out);

/**
 * Restores a model serialized by [`slgb_model_to_json`].
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum SlgbStatus slgb_model_from_json(const char *json, struct SlgbModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `m` must come from this library and not have been freed.
 */
void slgb_model_free(struct SlgbModel *m);

/**
 * Cohen's kappa of a `k` x `k` row-major confusion matrix (rows actual).
 *
 * # Safety
 * `counts` must point to `k * k` integers; `out` must be writable.
 */
enum SlgbStatus slgb_kappa(const uint64_t *counts, size_t k, double *out);

/**
 * Simplicity score of a model with `rules` rules.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlgbStatus slgb_simplicity(size_t rules, double lambda, double eta, double nu, double *out);

/**
 * Weighted combination of kappa and simplicity.
 *
 * # Safety
 * `out` must be writable.
 */
enum SlgbStatus slgb_utility(double kappa_value,
                             double simplicity_value,
                             double alpha,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLGB_H */
