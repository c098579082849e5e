/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FRACPOHO_H
#define FRACPOHO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. `Ok` is zero; everything else is an error.
 */
typedef enum fp_status {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_PARAMS = 2,
  FP_STATUS_DOMAIN = 3,
  FP_STATUS_DIMENSION_MISMATCH = 4,
  FP_STATUS_COINCIDENT_POINTS = 5,
  FP_STATUS_OUTSIDE_DOMAIN = 6,
  FP_STATUS_NOT_ON_BOUNDARY = 7,
  FP_STATUS_UNSUPPORTED_DIMENSION = 8,
  FP_STATUS_INVALID_ORDER = 9,
  FP_STATUS_HYPOTHESIS = 10,
  FP_STATUS_CONVERGENCE = 11,
  FP_STATUS_BUDGET_EXCEEDED = 12,
  FP_STATUS_CONFIG = 13,
  FP_STATUS_INVALID_STRING = 14,
  FP_STATUS_PANIC = 15,
} fp_status;

/**
 * Which argument a gradient is taken with respect to.
 */
typedef enum fp_slot {
  FP_SLOT_FIRST = 0,
  FP_SLOT_SECOND = 1,
} fp_slot;

/**
 * Opaque handle to the fractional kernels on one ball.
 */
typedef struct fp_green fp_green;

/**
 * Inputs of [`fp_verify`]. Optional points are null when absent; `axis`
 * is negative when absent.
 */
typedef struct fp_problem {
  /**
   * Identity name: `robin`, `bilinear`, `bilinear-general`,
   * `difference`, `local` or `local-vector`.
   */
  const char *identity;
  size_t dim;
  double s;
  double radius;
  const double *x;
  const double *y;
  const double *xi;
  int32_t axis;
  uint64_t seed;
  const size_t *orders;
  size_t n_orders;
} fp_problem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent call on this thread that failed; empty after
 * a successful call. The pointer stays valid until the next call on the
 * same thread.
 */
const char *fp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fp_version(void);

/**
 * Creates the kernels for `(-Δ)^s` on `B_radius(0) ⊂ R^dim`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum fp_status fp_green_new(size_t dim, double s, double radius, struct fp_green **out);

/**
 * Releases a handle. Null is accepted.
 *
 * # Safety
 * `h` must be null or a handle from [`fp_green_new`] not yet freed.
 */
void fp_green_free(struct fp_green *h);

/**
 * Dimension of the handle, or 0 for null.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t fp_green_dim(const struct fp_green *h);

/**
 * Robin function `R_s(x) = H_s(x, x)`.
 *
 * # Safety
 * `h` must be a live handle, `x` must point to `dim` doubles and `out` to
 * one writable double.
 */
enum fp_status fp_green_robin(const struct fp_green *h, const double *x, double *out);

/**
 * Gradient of `H_s(x, y)` in the argument picked by `slot`.
 *
 * # Safety
 * `h` must be a live handle; `x`, `y` must point to `dim` doubles and
 * `out` to `dim` writable doubles.
 */
enum fp_status fp_green_grad_h(const struct fp_green *h,
                               const double *x,
                               const double *y,
                               enum fp_slot slot,
                               double *out);

/**
 * Evaluates both sides of an identity over the given quadrature orders
 * and writes the report as a JSON string to `out_json`.
 *
 * # Safety
 * Every non-null pointer in `problem` must be valid for its documented
 * length; `identity` must be NUL-terminated. `out_json` must be writable.
 * The returned string is released with [`fp_string_free`].
 */
enum fp_status fp_verify(const struct fp_problem *problem, char **out_json);

/**
 * Releases a string returned by the library. Null is accepted.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void fp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACPOHO_H */
