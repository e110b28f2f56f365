#ifndef UQSEG_H
#define UQSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum UqsegStatus {
  UQSEG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  UQSEG_STATUS_NULL_POINTER = 1,
  /**
   * Inputs violate a precondition (shape, range, sum, schema).
   */
  UQSEG_STATUS_VALIDATION = 2,
  /**
   * The computation is undefined for these inputs.
   */
  UQSEG_STATUS_COMPUTATION = 3,
  UQSEG_STATUS_IO = 4,
  /**
   * A panic was caught at the boundary.
   */
  UQSEG_STATUS_INTERNAL = 5,
} UqsegStatus;

/**
 * Label map, `(Z, Y, X)` `u8`.
 */
typedef struct UqsegLabelMap UqsegLabelMap;

/**
 * Probability map, class-major `(C, Z, Y, X)` `f32`.
 */
typedef struct UqsegProbMap UqsegProbMap;

/**
 * Case-evaluation settings; pass null for the defaults (10 equal-width
 * bins, band radius 2, whole-volume masks, IoU distance).
 */
typedef struct UqsegEvalOptions {
  size_t n_bins;
  size_t band_radius;
  /**
   * 0 whole volume, 1 foreground union.
   */
  int32_t calibration_mask;
  /**
   * 0 whole volume, 1 foreground union.
   */
  int32_t ncc_mask;
  /**
   * 0 IoU, 1 Dice.
   */
  int32_t ged_distance;
} UqsegEvalOptions;

/**
 * Metric values of one case. `has_*` flags are 0 when the value is undefined.
 */
typedef struct UqsegMetricRecord {
  double dsc;
  double ace;
  double ba_ece;
  int32_t has_ba_ece;
  double ncc;
  int32_t ncc_degenerate;
  double ged;
  double u;
  int32_t has_u;
  double r;
} UqsegMetricRecord;

typedef struct UqsegBootstrapResult {
  double mean_delta;
  double bootstrap_mean;
  double ci_low;
  double ci_high;
  double p_value;
  /**
   * 0 not significant, 1 p < 0.05, 2 p < 0.001.
   */
  int32_t tier;
} UqsegBootstrapResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *uqseg_last_error(void);

/**
 * Copies and validates a probability map of `classes * z * y * x` values.
 *
 * # Safety
 * `data` must point to `len` readable floats; `out` must be writable.
 */
enum UqsegStatus uqseg_probmap_new(size_t classes,
                                   size_t z,
                                   size_t y,
                                   size_t x,
                                   const float *data,
                                   size_t len,
                                   struct UqsegProbMap **out);

/**
 * Loads a probability map from a UQV sidecar path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum UqsegStatus uqseg_probmap_load(const char *path, struct UqsegProbMap **out);

/**
 * # Safety
 * `map` must come from this library and not be freed twice. Null is a no-op.
 */
void uqseg_probmap_free(struct UqsegProbMap *map);

/**
 * Number of classes, or 0 for null.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
size_t uqseg_probmap_classes(const struct UqsegProbMap *map);

/**
 * Pointer to the `classes * voxels` values, or null; valid while `map` lives.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
const float *uqseg_probmap_data(const struct UqsegProbMap *map, size_t *len);

/**
 * Copies a label map of `z * y * x` labels, each below `classes`.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum UqsegStatus uqseg_labelmap_new(size_t classes,
                                    size_t z,
                                    size_t y,
                                    size_t x,
                                    const uint8_t *data,
                                    size_t len,
                                    struct UqsegLabelMap **out);

/**
 * Loads a label map from a UQV sidecar path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum UqsegStatus uqseg_labelmap_load(const char *path, struct UqsegLabelMap **out);

/**
 * # Safety
 * `map` must come from this library and not be freed twice. Null is a no-op.
 */
void uqseg_labelmap_free(struct UqsegLabelMap *map);

/**
 * Voxelwise mean of `n` member maps; the result is a new handle.
 *
 * # Safety
 * `members` must point to `n` live handles; `out` must be writable.
 */
enum UqsegStatus uqseg_aggregate_mean(const struct UqsegProbMap *const *members,
                                      size_t n,
                                      struct UqsegProbMap **out);

/**
 * Foreground-averaged Dice between two label maps.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum UqsegStatus uqseg_dsc(const struct UqsegLabelMap *prediction,
                           const struct UqsegLabelMap *reference,
                           size_t classes,
                           double *out);

/**
 * ACE of a mean probability map against `n_raters` rater maps.
 *
 * # Safety
 * Handles must be live; `raters` must point to `n_raters` handles.
 */
enum UqsegStatus uqseg_ace(const struct UqsegProbMap *mean,
                           const struct UqsegLabelMap *const *raters,
                           size_t n_raters,
                           size_t n_bins,
                           double *out);

/**
 * Boundary-aware ECE in a band of Chebyshev radius `band_radius` around
 * the consensus boundary.
 *
 * # Safety
 * Handles must be live; `raters` must point to `n_raters` handles.
 */
enum UqsegStatus uqseg_ba_ece(const struct UqsegProbMap *mean,
                              const struct UqsegLabelMap *const *raters,
                              size_t n_raters,
                              const struct UqsegLabelMap *consensus,
                              size_t band_radius,
                              size_t n_bins,
                              double *out);

/**
 * Generalized energy distance between member and rater label sets;
 * `distance` is 0 for IoU, 1 for Dice.
 *
 * # Safety
 * Array arguments must point to the given number of live handles.
 */
enum UqsegStatus uqseg_ged(const struct UqsegLabelMap *const *members,
                           size_t n_members,
                           const struct UqsegLabelMap *const *raters,
                           size_t n_raters,
                           size_t classes,
                           int32_t distance,
                           double *out);

/**
 * Scores one case. A null `consensus` uses the raters' majority vote; null
 * `options` uses the defaults.
 *
 * # Safety
 * Array arguments must point to the given number of live handles; `out`
 * must be writable.
 */
enum UqsegStatus uqseg_evaluate_case(const struct UqsegProbMap *const *members,
                                     size_t n_members,
                                     const struct UqsegLabelMap *const *raters,
                                     size_t n_raters,
                                     const struct UqsegLabelMap *consensus,
                                     const struct UqsegEvalOptions *options,
                                     struct UqsegMetricRecord *out);

/**
 * AURC of `n` cases with uncertainty `u` and risk `r`; ties in `u` are
 * broken by case index.
 *
 * # Safety
 * `u` and `r` must point to `n` readable doubles.
 */
enum UqsegStatus uqseg_aurc(const double *u, const double *r, size_t n, double *out);

/**
 * Paired case bootstrap of `mean(b - a)` over `n` cases.
 *
 * # Safety
 * `a` and `b` must point to `n` readable doubles; `out` must be writable.
 */
enum UqsegStatus uqseg_paired_bootstrap(const double *a,
                                        const double *b,
                                        size_t n,
                                        size_t resamples,
                                        uint64_t seed,
                                        struct UqsegBootstrapResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UQSEG_H */
