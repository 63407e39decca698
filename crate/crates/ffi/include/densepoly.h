#ifndef DENSEPOLY_H
#define DENSEPOLY_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpFleet {
  DP_FLEET_GAUSSIAN = 0,
  DP_FLEET_COSH = 1,
  DP_FLEET_SIN_GAUSSIAN = 2,
  DP_FLEET_BUMP = 3,
  DP_FLEET_SIN = 4,
} DpFleet;

typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_INPUT = 2,
  DP_STATUS_ORDER = 3,
  DP_STATUS_TRUNCATION = 4,
  DP_STATUS_CERTIFICATE = 5,
  DP_STATUS_DIVERGENCE = 6,
  DP_STATUS_BUDGET = 7,
  DP_STATUS_NUMERIC = 8,
  DP_STATUS_PANIC = 9,
} DpStatus;

typedef enum DpVerdict {
  DP_VERDICT_INTERIOR = 0,
  DP_VERDICT_BOUNDARY = 1,
  DP_VERDICT_DIVERGENT = 2,
} DpVerdict;

typedef struct DpFunction DpFunction;

typedef struct DpFunctional DpFunctional;

typedef struct DpPoly DpPoly;

typedef struct DpWeight DpWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *dp_last_error(void);

/**
 * `φ_m(x) = (1 + 1/m)·‖x‖^a`, `a > 1`.
 *
 * # Safety
 * `out_w` must be a valid pointer.
 */
enum DpStatus dp_weight_power(double a, size_t dim, struct DpWeight **out_w);

/**
 * # Safety
 * `out_w` must be a valid pointer.
 */
enum DpStatus dp_weight_log_penalty(double coeff,
                                    double exponent,
                                    size_t dim,
                                    struct DpWeight **out_w);

/**
 * `φ_m(x)` with `x` of length `dim`.
 *
 * # Safety
 * `w` must come from this library; `x` must point to `dim` values.
 */
enum DpStatus dp_weight_eval(const struct DpWeight *w,
                             size_t m,
                             const double *x,
                             size_t dim,
                             double *value);

/**
 * # Safety
 * `w` must come from this library or be null.
 */
void dp_weight_free(struct DpWeight *w);

/**
 * # Safety
 * `out_f` must be a valid pointer.
 */
enum DpStatus dp_function_fleet(enum DpFleet kind, size_t dim, struct DpFunction **out_f);

/**
 * `D^α f(x)`; `alpha` and `x` both have length `dim`.
 *
 * # Safety
 * Pointers must be valid for `dim` elements.
 */
enum DpStatus dp_function_deriv(const struct DpFunction *f,
                                const size_t *alpha,
                                const double *x,
                                size_t dim,
                                double *value);

/**
 * Grid value of `q_m(f)` on `[−radius, radius]^n`.
 *
 * # Safety
 * Handles must come from this library.
 */
enum DpStatus dp_seminorm(const struct DpFunction *f,
                          const struct DpWeight *w,
                          size_t m,
                          double radius,
                          size_t points_per_axis,
                          double *value);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void dp_function_free(struct DpFunction *f);

/**
 * Full approximation pipeline for `f` to accuracy `eps` in `q_m`.
 * Writes the polynomial and the re-measured error.
 *
 * # Safety
 * Handles must come from this library; out pointers must be valid.
 */
enum DpStatus dp_pipeline(const struct DpFunction *f,
                          const struct DpWeight *w,
                          size_t m,
                          double eps,
                          size_t nu_max,
                          double lambda_max,
                          size_t n_max,
                          size_t points_per_axis,
                          struct DpPoly **out_p,
                          double *error);

/**
 * Degree-`n` Taylor polynomial of the product kernel in `dim` variables.
 *
 * # Safety
 * `out_p` must be a valid pointer.
 */
enum DpStatus dp_kernel_taylor(size_t n, size_t dim, struct DpPoly **out_p);

/**
 * # Safety
 * `p` must come from this library; `x` must hold `dim` values.
 */
enum DpStatus dp_poly_eval(const struct DpPoly *p, const double *x, size_t dim, double *value);

/**
 * Total degree; 0 for the zero polynomial or a null handle.
 *
 * # Safety
 * `p` must come from this library or be null.
 */
size_t dp_poly_degree(const struct DpPoly *p);

/**
 * Number of nonzero terms.
 *
 * # Safety
 * `p` must come from this library or be null.
 */
size_t dp_poly_num_terms(const struct DpPoly *p);

/**
 * # Safety
 * `p` must come from this library or be null.
 */
void dp_poly_free(struct DpPoly *p);

/**
 * `F(f) = Σ_j (re_j + i·im_j)·f^{(order_j)}(point_j)` over `n` terms.
 *
 * # Safety
 * Arrays must hold `n` elements.
 */
enum DpStatus dp_functional_new(size_t n,
                                const double *re,
                                const double *im,
                                const size_t *orders,
                                const double *points,
                                struct DpFunctional **out_f);

/**
 * `F(f)` for a one-variable function.
 *
 * # Safety
 * Handles must come from this library.
 */
enum DpStatus dp_functional_apply(const struct DpFunctional *func,
                                  const struct DpFunction *f,
                                  double *re,
                                  double *im);

/**
 * Growth norm of the transform on the default rectangle protocol.
 *
 * # Safety
 * Handles must come from this library; `verdict` may be null.
 */
enum DpStatus dp_functional_growth_norm(const struct DpFunctional *func,
                                        size_t m,
                                        const struct DpWeight *w,
                                        double *value,
                                        enum DpVerdict *verdict);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void dp_functional_free(struct DpFunctional *f);

/**
 * `K_m = Σ_k c_k^{(m)}/c_k^{(m+1)}` for `c_k^{(m)} = base^{km}`.
 *
 * # Safety
 * `value` must be a valid pointer.
 */
enum DpStatus dp_km_geometric(double base, size_t m, double tol, double *value);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DENSEPOLY_H */
