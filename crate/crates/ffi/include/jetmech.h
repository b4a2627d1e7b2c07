#ifndef JETMECH_H
#define JETMECH_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum JmStatus {
  JM_STATUS_OK = 0,
  JM_STATUS_NULL_POINTER = 1,
  JM_STATUS_INVALID_UTF8 = 2,
  JM_STATUS_PARSE = 3,
  JM_STATUS_VALIDATION = 4,
  JM_STATUS_NUMERICAL = 5,
  JM_STATUS_PANIC = 6,
} JmStatus;

/**
 * Symbol families; indexed families take a zero-based index.
 */
typedef enum JmSymKind {
  JM_SYM_KIND_T = 0,
  JM_SYM_KIND_Q = 1,
  JM_SYM_KIND_QT = 2,
  JM_SYM_KIND_QTT = 3,
  JM_SYM_KIND_P0 = 4,
  JM_SYM_KIND_P = 5,
  JM_SYM_KIND_PT = 6,
} JmSymKind;

typedef struct JmExpr JmExpr;

typedef struct JmHamiltonian JmHamiltonian;

typedef struct JmLagrangian JmLagrangian;

typedef struct JmTrajectory JmTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *jm_last_error(void);

/**
 * # Safety
 * `s` must come from a jetmech call returning an owned string, or be NULL.
 */
void jm_string_free(char *s);

/**
 * Parses `src` over coordinates of dimension `dim`.
 *
 * # Safety
 * `src` must be a NUL-terminated string and `out` a writable pointer.
 */
enum JmStatus jm_expr_parse(const char *src, size_t dim, struct JmExpr **out);

/**
 * Canonical text of `expr`; release with [`jm_string_free`]. NULL if `expr` is NULL.
 *
 * # Safety
 * `expr` must be a live handle or NULL.
 */
char *jm_expr_to_string(const struct JmExpr *expr);

/**
 * Partial derivative with respect to one symbol.
 *
 * # Safety
 * `expr` must be a live handle and `out` a writable pointer.
 */
enum JmStatus jm_expr_diff(const struct JmExpr *expr,
                           enum JmSymKind kind,
                           size_t index,
                           struct JmExpr **out);

/**
 * Evaluates `expr` at the point assigning `values[k]` to symbol `(kinds[k], indices[k])`.
 *
 * # Safety
 * `kinds`, `indices` and `values` must each hold `count` elements; `out` must be writable.
 */
enum JmStatus jm_expr_evaluate(const struct JmExpr *expr,
                               const enum JmSymKind *kinds,
                               const size_t *indices,
                               const double *values,
                               size_t count,
                               double *out);

/**
 * # Safety
 * `expr` must come from this library, or be NULL.
 */
void jm_expr_free(struct JmExpr *expr);

/**
 * # Safety
 * `src` must be a NUL-terminated string and `out` a writable pointer.
 */
enum JmStatus jm_lagrangian_parse(const char *src, size_t dim, struct JmLagrangian **out);

/**
 * Configuration dimension, or 0 for NULL.
 *
 * # Safety
 * `sys` must be a live handle or NULL.
 */
size_t jm_lagrangian_dim(const struct JmLagrangian *sys);

/**
 * Component `index` of the Lagrange operator.
 *
 * # Safety
 * `sys` must be a live handle and `out` a writable pointer.
 */
enum JmStatus jm_lagrangian_operator(const struct JmLagrangian *sys,
                                     size_t index,
                                     struct JmExpr **out);

/**
 * Integrates the Euler–Lagrange equations from `(t0, q, qt)` to `t1`.
 *
 * # Safety
 * `q` and `qt` must hold `dim` values; `out` must be writable.
 */
enum JmStatus jm_lagrangian_integrate(const struct JmLagrangian *sys,
                                      double t0,
                                      const double *q,
                                      const double *qt,
                                      double t1,
                                      double dt,
                                      struct JmTrajectory **out);

/**
 * # Safety
 * `sys` must come from this library, or be NULL.
 */
void jm_lagrangian_free(struct JmLagrangian *sys);

/**
 * # Safety
 * `src` must be a NUL-terminated string and `out` a writable pointer.
 */
enum JmStatus jm_hamiltonian_parse(const char *src, size_t dim, struct JmHamiltonian **out);

/**
 * Hamiltonian associated with a hyperregular Lagrangian.
 *
 * # Safety
 * `sys` must be a live handle and `out` a writable pointer.
 */
enum JmStatus jm_hamiltonian_from_lagrangian(const struct JmLagrangian *sys,
                                             struct JmHamiltonian **out);

/**
 * The Hamiltonian function as an expression.
 *
 * # Safety
 * `h` must be a live handle and `out` a writable pointer.
 */
enum JmStatus jm_hamiltonian_expr(const struct JmHamiltonian *h, struct JmExpr **out);

/**
 * Poisson bracket of two expressions.
 *
 * # Safety
 * `f` and `g` must be live handles and `out` a writable pointer.
 */
enum JmStatus jm_poisson_bracket(const struct JmExpr *f,
                                 const struct JmExpr *g,
                                 struct JmExpr **out);

/**
 * Integrates Hamilton's equations from `(t0, q, p)` to `t1`.
 *
 * # Safety
 * `q` and `p` must hold `dim` values; `out` must be writable.
 */
enum JmStatus jm_hamiltonian_integrate(const struct JmHamiltonian *h,
                                       double t0,
                                       const double *q,
                                       const double *p,
                                       double t1,
                                       double dt,
                                       struct JmTrajectory **out);

/**
 * # Safety
 * `h` must come from this library, or be NULL.
 */
void jm_hamiltonian_free(struct JmHamiltonian *h);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `tr` must be a live handle or NULL.
 */
size_t jm_trajectory_len(const struct JmTrajectory *tr);

/**
 * Configuration dimension, or 0 for NULL. Each state has twice this many values.
 *
 * # Safety
 * `tr` must be a live handle or NULL.
 */
size_t jm_trajectory_dim(const struct JmTrajectory *tr);

/**
 * Copies sample `k`: its time into `time` and its `2 * dim` state values into `state`.
 *
 * # Safety
 * `tr` must be a live handle, `time` writable and `state` writable for `2 * dim` values.
 */
enum JmStatus jm_trajectory_sample(const struct JmTrajectory *tr,
                                   size_t k,
                                   double *time,
                                   double *state);

/**
 * Trajectory as CSV text; release with [`jm_string_free`]. NULL if `tr` is NULL.
 *
 * # Safety
 * `tr` must be a live handle or NULL.
 */
char *jm_trajectory_to_csv(const struct JmTrajectory *tr);

/**
 * # Safety
 * `tr` must come from this library, or be NULL.
 */
void jm_trajectory_free(struct JmTrajectory *tr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETMECH_H */
