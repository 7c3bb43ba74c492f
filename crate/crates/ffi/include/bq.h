#ifndef BQ_H
#define BQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BqStatus {
  BQ_STATUS_OK = 0,
  BQ_STATUS_NULL_POINTER = 1,
  BQ_STATUS_INVALID_ARGUMENT = 2,
  BQ_STATUS_DIMENSION_MISMATCH = 3,
  BQ_STATUS_NUMERICAL = 4,
  BQ_STATUS_ORACLE = 5,
  BQ_STATUS_CONFIG = 6,
  BQ_STATUS_IO = 7,
  BQ_STATUS_PANIC = 8,
} BqStatus;

typedef enum BqStrategy {
  BQ_STRATEGY_MC = 0,
  BQ_STRATEGY_MVS = 1,
  BQ_STRATEGY_MVS_MC = 2,
} BqStrategy;

typedef struct BqGp BqGp;

typedef struct BqIntegrand BqIntegrand;

typedef struct BqKernel BqKernel;

/**
 * Result of [`bq_estimate`].
 */
typedef struct BqEstimate {
  double estimate;
  /**
   * Integral of the posterior mean after the MVS batch (0 for MC).
   */
  double initial_estimate;
  /**
   * Residual estimate from the MC batch (0 for MVS).
   */
  double residual;
  size_t queries;
} BqEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bq_version(void);

/**
 * Matérn kernel with smoothness `nu`, lengthscale and output scale.
 *
 * # Safety
 * `out_kernel` must be a valid pointer to writable storage for one handle.
 */
enum BqStatus bq_kernel_new(double nu,
                            double lengthscale,
                            double scale,
                            struct BqKernel **out_kernel);

/**
 * `k(x, y)` for two points of length `dim`.
 *
 * # Safety
 * `x` and `y` must point to `dim` doubles; `kernel` must be a live handle.
 */
enum BqStatus bq_kernel_eval(const struct BqKernel *kernel,
                             const double *x,
                             const double *y,
                             size_t dim,
                             double *out_value);

/**
 * # Safety
 * `kernel` must be NULL or a handle from [`bq_kernel_new`] not yet freed.
 */
void bq_kernel_free(struct BqKernel *kernel);

/**
 * Empty GP posterior on `dim`-dimensional inputs with regularizer `lambda`.
 * The kernel is copied; its handle may be freed afterwards.
 *
 * # Safety
 * `kernel` must be a live handle and `out_gp` writable.
 */
enum BqStatus bq_gp_new(const struct BqKernel *kernel,
                        double lambda,
                        size_t dim,
                        struct BqGp **out_gp);

/**
 * Adds the observation `(x, y)`; `x` has the GP's dimension.
 *
 * # Safety
 * `gp` must be a live handle and `x` point to `dim` doubles.
 */
enum BqStatus bq_gp_observe(struct BqGp *gp, const double *x, size_t dim, double y);

/**
 * Number of observations.
 *
 * # Safety
 * `gp` must be a live handle.
 */
enum BqStatus bq_gp_len(const struct BqGp *gp, size_t *out_len);

/**
 * Posterior mean and variance at `x`. Either output may be NULL.
 *
 * # Safety
 * `gp` must be a live handle and `x` point to `dim` doubles.
 */
enum BqStatus bq_gp_predict(const struct BqGp *gp,
                            const double *x,
                            size_t dim,
                            double *out_mean,
                            double *out_var);

/**
 * # Safety
 * `gp` must be NULL or a handle from [`bq_gp_new`] not yet freed.
 */
void bq_gp_free(struct BqGp *gp);

/**
 * Benchmark function by name (`ackley`, `alpine1`, `gramacy-lee`,
 * `griewank`, `rastrigin`, `keane`) rescaled to the unit cube.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out_integrand` writable.
 */
enum BqStatus bq_integrand_benchmark(const char *name,
                                     size_t dim,
                                     struct BqIntegrand **out_integrand);

/**
 * # Safety
 * `out_integrand` must be writable.
 */
enum BqStatus bq_integrand_constant(size_t dim, double value, struct BqIntegrand **out_integrand);

/**
 * Random kernel expansion with `centers` terms drawn from `seed`.
 *
 * # Safety
 * `kernel` must be a live handle and `out_integrand` writable.
 */
enum BqStatus bq_integrand_synthetic(size_t dim,
                                     size_t centers,
                                     const struct BqKernel *kernel,
                                     uint64_t seed,
                                     struct BqIntegrand **out_integrand);

/**
 * Integrand from the compact form used by the `bq` command line, e.g.
 * `benchmark:ackley:2`, `bump:1:16` or `sensor:/path/data.csv`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out_integrand` writable.
 */
enum BqStatus bq_integrand_parse(const char *spec,
                                 uint64_t seed,
                                 struct BqIntegrand **out_integrand);

/**
 * # Safety
 * `integrand` must be a live handle.
 */
enum BqStatus bq_integrand_dim(const struct BqIntegrand *integrand, size_t *out_dim);

/**
 * # Safety
 * `integrand` must be a live handle and `x` point to `dim` doubles.
 */
enum BqStatus bq_integrand_eval(const struct BqIntegrand *integrand,
                                const double *x,
                                size_t dim,
                                double *out_value);

/**
 * # Safety
 * `integrand` must be NULL or a handle not yet freed.
 */
void bq_integrand_free(struct BqIntegrand *integrand);

/**
 * Reference integral over the unit cube with the default oracle settings.
 * `out_err` (may be NULL) receives the oracle's error estimate.
 *
 * # Safety
 * `integrand` must be a live handle.
 */
enum BqStatus bq_oracle_integrate(const struct BqIntegrand *integrand,
                                  double *out_value,
                                  double *out_err);

/**
 * Runs one estimator with `budget` noisy queries of standard deviation
 * `sigma` under the uniform weight. `split` is the MVS fraction of the
 * two-batch estimator. `kernel` may be NULL for Monte Carlo; the GP
 * regularizer is `max(sigma², 1e-10·scale)`. Equal seeds give equal results.
 *
 * # Safety
 * `integrand` must be a live handle, `kernel` NULL or live, `out_estimate`
 * writable.
 */
enum BqStatus bq_estimate(const struct BqIntegrand *integrand,
                          enum BqStrategy strategy,
                          size_t budget,
                          double split,
                          double sigma,
                          const struct BqKernel *kernel,
                          uint64_t seed,
                          struct BqEstimate *out_estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BQ_H */
