#ifndef WDRO_H
#define WDRO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every API function.
 */
typedef enum WdroStatus {
  WdroStatus_Ok = 0,
  WdroStatus_NullPointer = 1,
  WdroStatus_InvalidArgument = 2,
  WdroStatus_ComputationFailed = 3,
  WdroStatus_Panic = 4,
} WdroStatus;

/**
 * Opaque dataset handle.
 */
typedef struct WdroDataset WdroDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null when
 * the last call succeeded. The pointer stays valid until the next API call
 * on the same thread.
 */
const char *wdro_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *wdro_version(void);

/**
 * Builds a dataset from a row-major `n x d` feature matrix and an optional
 * response vector of length `n` (pass null for none). Returns a handle
 * through `out`; free it with `wdro_dataset_free`.
 *
 * # Safety
 * `features` must point to `n * d` doubles; `response` must be null or
 * point to `n` doubles; `out` must be a valid pointer.
 */
enum WdroStatus wdro_dataset_new(const double *features,
                                 uintptr_t n,
                                 uintptr_t d,
                                 const double *response,
                                 struct WdroDataset **out);

/**
 * Frees a dataset handle. Passing null is a no-op.
 *
 * # Safety
 * `ds` must be a handle from `wdro_dataset_new` not yet freed.
 */
void wdro_dataset_free(struct WdroDataset *ds);

/**
 * Number of rows in the dataset.
 *
 * # Safety
 * `ds` and `out` must be valid pointers.
 */
enum WdroStatus wdro_dataset_len(const struct WdroDataset *ds, uintptr_t *out);

/**
 * Worst-case squared-loss regression risk over the ball of radius `delta`
 * (closed form). `a` is the response transport weight; pass INFINITY to
 * pin the response.
 *
 * # Safety
 * `ds` must be a live handle with a response; `theta` must point to `d`
 * doubles matching the feature dimension; `out` must be valid.
 */
enum WdroStatus wdro_wc_regression_risk(const struct WdroDataset *ds,
                                        const double *theta,
                                        uintptr_t d,
                                        double delta,
                                        double p,
                                        double a,
                                        double *out);

/**
 * Worst-case (smallest) mean portfolio return over the ball.
 *
 * # Safety
 * As for `wdro_wc_regression_risk`, on a dataset without a response.
 */
enum WdroStatus wdro_wc_portfolio_return(const struct WdroDataset *ds,
                                         const double *theta,
                                         uintptr_t d,
                                         double delta,
                                         double p,
                                         double *out);

/**
 * Fits the distributionally robust regression (square-root penalty) and
 * writes the coefficient vector into `out_theta` (length `d`).
 *
 * # Safety
 * `ds` must be a live handle with a response; `out_theta` must point to
 * `d` writable doubles with `d` the feature dimension.
 */
enum WdroStatus wdro_fit_sqrt_lasso(const struct WdroDataset *ds,
                                    double delta,
                                    double p,
                                    double *out_theta,
                                    uintptr_t d);

/**
 * Profile (projection) distance of the sample to the mean-estimation
 * manifold at `theta`, and the scaled statistic `n * value`.
 *
 * # Safety
 * `ds` must be a live handle; `theta` points to `d` doubles; the out
 * pointers must be valid.
 */
enum WdroStatus wdro_profile_mean(const struct WdroDataset *ds,
                                  const double *theta,
                                  uintptr_t d,
                                  double *out_value,
                                  double *out_scaled);

/**
 * Data-driven ball radius: the `1 - alpha` Monte Carlo quantile of the
 * profile limit law at `theta`, divided by `n`. Deterministic in `seed`.
 *
 * # Safety
 * `ds` must be a live handle with a response; `theta` points to `d`
 * doubles; `out_delta` must be valid.
 */
enum WdroStatus wdro_estimate_radius(const struct WdroDataset *ds,
                                     const double *theta,
                                     uintptr_t d,
                                     double p,
                                     double alpha,
                                     uintptr_t draws,
                                     uint64_t seed,
                                     double *out_delta);

/**
 * High-dimensional radius prescription; writes `sqrt(delta)`.
 */
enum WdroStatus wdro_sqrt_lasso_radius(uintptr_t n,
                                       uintptr_t d,
                                       double alpha,
                                       double *out_sqrt_delta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WDRO_H */
