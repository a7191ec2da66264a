#ifndef AIRI_H
#define AIRI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum AiriStatus {
  AIRI_STATUS_OK = 0,
  AIRI_STATUS_NULL_POINTER = 1,
  AIRI_STATUS_INVALID_ARGUMENT = 2,
  AIRI_STATUS_NUMERICAL = 3,
  AIRI_STATUS_IO = 4,
  AIRI_STATUS_PANIC = 5,
} AiriStatus;

/**
 * A loaded denoiser network.
 */
typedef struct AiriDenoiser AiriDenoiser;

/**
 * Measurement operator for a fixed coverage and image size.
 */
typedef struct AiriOperator AiriOperator;

/**
 * Solver settings shared by both solvers; zero fields take defaults.
 */
typedef struct AiriSolveOptions {
  /**
   * Standard deviation of the visibility noise.
   */
  double tau;
  /**
   * Multiplier of the heuristic regularisation level; 0 means 1.
   */
  double multiplier;
  /**
   * Iteration cap; 0 means the library default.
   */
  size_t max_iter;
  /**
   * Wavelet depth for uSARA; 0 means the library default.
   */
  size_t depth;
} AiriSolveOptions;

/**
 * Summary written back by the solvers.
 */
typedef struct AiriSolveResult {
  size_t iterations;
  bool converged;
  /**
   * Regularisation level used (γλ for uSARA, σ for AIRI).
   */
  double level;
} AiriSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *airi_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *airi_last_error(void);

/**
 * Builds an operator from `m` points `uv[2k], uv[2k+1]` (wavelengths).
 * A non-positive `band` makes the outermost point sit on the band edge.
 *
 * # Safety
 * `uv` must point to `2m` doubles and `out` to writable storage.
 */
enum AiriStatus airi_operator_new(const double *uv,
                                  size_t m,
                                  double band,
                                  size_t rows,
                                  size_t cols,
                                  struct AiriOperator **out);

/**
 * # Safety
 * `op` must come from [`airi_operator_new`] and not be used afterwards.
 */
void airi_operator_free(struct AiriOperator *op);

/**
 * Number of visibilities, 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t airi_operator_num_measurements(const struct AiriOperator *op);

/**
 * `y = Φx`, written as `2m` interleaved doubles.
 *
 * # Safety
 * `x` must hold `rows·cols` doubles and `y` room for `2m`.
 */
enum AiriStatus airi_operator_forward(const struct AiriOperator *op, const double *x, double *y);

/**
 * `x = Re{Φ†y}`.
 *
 * # Safety
 * `y` must hold `2m` doubles and `x` room for `rows·cols`.
 */
enum AiriStatus airi_operator_adjoint(const struct AiriOperator *op, const double *y, double *x);

/**
 * Spectral norm of `Re{Φ†Φ}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AiriStatus airi_operator_lipschitz(const struct AiriOperator *op, double *out);

/**
 * Loads `manifest.json` with `weights.bin` beside it.
 *
 * # Safety
 * `manifest` must be a NUL-terminated path and `out` writable.
 */
enum AiriStatus airi_denoiser_load(const char *manifest, struct AiriDenoiser **out);

/**
 * # Safety
 * `d` must come from [`airi_denoiser_load`] and not be used afterwards.
 */
void airi_denoiser_free(struct AiriDenoiser *d);

/**
 * Noise level the network was trained at.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
double airi_denoiser_sigma(const struct AiriDenoiser *d);

/**
 * `out = D(x)` for a `rows × cols` image.
 *
 * # Safety
 * `x` and `out` must each hold `rows·cols` doubles.
 */
enum AiriStatus airi_denoiser_apply(const struct AiriDenoiser *d,
                                    size_t rows,
                                    size_t cols,
                                    const double *x,
                                    double *out);

/**
 * Spectral norm of the Jacobian of `2D − I` at `x`.
 *
 * # Safety
 * `x` must hold `rows·cols` doubles and `out` be writable.
 */
enum AiriStatus airi_denoiser_jacobian_norm(const struct AiriDenoiser *d,
                                            size_t rows,
                                            size_t cols,
                                            const double *x,
                                            size_t iters,
                                            uint64_t seed,
                                            double *out);

/**
 * Runs uSARA with the heuristic regularisation scaled by the multiplier.
 *
 * # Safety
 * `y` must hold `2m` doubles, `x` room for `rows·cols`, `result` may be null.
 */
enum AiriStatus airi_solve_usara(const struct AiriOperator *op,
                                 const double *y,
                                 struct AiriSolveOptions opts,
                                 double *x,
                                 struct AiriSolveResult *result);

/**
 * Runs AIRI with the denoiser rescaled to the heuristic noise level
 * times the multiplier.
 *
 * # Safety
 * `y` must hold `2m` doubles, `x` room for `rows·cols`, `result` may be null.
 */
enum AiriStatus airi_solve_airi(const struct AiriOperator *op,
                                const struct AiriDenoiser *d,
                                const double *y,
                                struct AiriSolveOptions opts,
                                double *x,
                                struct AiriSolveResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRI_H */
