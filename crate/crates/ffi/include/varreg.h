#ifndef VARREG_H
#define VARREG_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VrStatus {
  VR_STATUS_OK = 0,
  VR_STATUS_NULL_POINTER = 1,
  VR_STATUS_DIMENSION_MISMATCH = 2,
  VR_STATUS_INVALID_PARAMETER = 3,
  VR_STATUS_NON_FINITE = 4,
  VR_STATUS_NOT_CONVERGED = 5,
  VR_STATUS_NOT_A_SUBGRADIENT = 6,
  VR_STATUS_UNSUPPORTED = 7,
  VR_STATUS_PANIC = 8,
  VR_STATUS_OTHER = 9,
} VrStatus;

typedef enum VrRegularizerKind {
  VR_REGULARIZER_KIND_QUADRATIC = 0,
  VR_REGULARIZER_KIND_L1 = 1,
  VR_REGULARIZER_KIND_TV_ANISO = 2,
} VrRegularizerKind;

typedef struct VrOperator VrOperator;

typedef struct VrRegularizer VrRegularizer;

typedef struct VrSolution VrSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *vr_last_error_message(void);

/**
 * # Safety
 * `out` must be writable.
 */
enum VrStatus vr_operator_identity(size_t n, struct VrOperator **out);

/**
 * Row-major `rows x cols` matrix.
 *
 * # Safety
 * `data` must hold `rows * cols` values; `out` must be writable.
 */
enum VrStatus vr_operator_dense(size_t rows,
                                size_t cols,
                                const double *data,
                                struct VrOperator **out);

/**
 * Periodic convolution of length `n` with a centred kernel.
 *
 * # Safety
 * `kernel` must hold `kernel_len` values; `out` must be writable.
 */
enum VrStatus vr_operator_convolution(const double *kernel,
                                      size_t kernel_len,
                                      size_t n,
                                      struct VrOperator **out);

/**
 * Parallel-beam Radon transform on a `grid_n x grid_n` image.
 *
 * # Safety
 * `out` must be writable.
 */
enum VrStatus vr_operator_radon(size_t grid_n,
                                size_t n_angles,
                                size_t n_offsets,
                                struct VrOperator **out);

/**
 * # Safety
 * `op` must come from a `vr_operator_*` constructor and not be used again.
 */
void vr_operator_free(struct VrOperator *op);

/**
 * # Safety
 * `op` must be a live handle; the outputs must be writable.
 */
enum VrStatus vr_operator_dims(const struct VrOperator *op, size_t *in_dim, size_t *out_dim);

/**
 * `out = F u`
 *
 * # Safety
 * Buffers must hold the given lengths.
 */
enum VrStatus vr_operator_apply(const struct VrOperator *op,
                                const double *u,
                                size_t u_len,
                                double *out,
                                size_t out_len);

/**
 * `out = F* v`
 *
 * # Safety
 * Buffers must hold the given lengths.
 */
enum VrStatus vr_operator_adjoint(const struct VrOperator *op,
                                  const double *v,
                                  size_t v_len,
                                  double *out,
                                  size_t out_len);

/**
 * Power-iteration estimate of the operator norm.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum VrStatus vr_operator_norm_estimate(const struct VrOperator *op, uint64_t seed, double *out);

/**
 * Largest relative defect of `<Fu, v> = <u, F*v>` over seeded trials.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum VrStatus vr_adjoint_defect(const struct VrOperator *op,
                                size_t trials,
                                uint64_t seed,
                                double *out);

/**
 * Anisotropic TV uses a `rows x cols` pixel grid; the other kinds ignore
 * the grid.
 *
 * # Safety
 * `out` must be writable.
 */
enum VrStatus vr_regularizer_new(enum VrRegularizerKind kind,
                                 size_t rows,
                                 size_t cols,
                                 struct VrRegularizer **out);

/**
 * # Safety
 * `reg` must come from [`vr_regularizer_new`] and not be used again.
 */
void vr_regularizer_free(struct VrRegularizer *reg);

/**
 * `J(u)`
 *
 * # Safety
 * `u` must hold `n` values; `out` must be writable.
 */
enum VrStatus vr_regularizer_value(const struct VrRegularizer *reg,
                                   const double *u,
                                   size_t n,
                                   double *out);

/**
 * `out = argmin_w |w - x|^2 / 2 + tau J(w)`; unsupported for TV.
 *
 * # Safety
 * `x` and `out` must hold `n` values.
 */
enum VrStatus vr_regularizer_prox(const struct VrRegularizer *reg,
                                  double tau,
                                  const double *x,
                                  size_t n,
                                  double *out);

/**
 * `J(u~) - J(u) - <p, u~ - u>` after checking `p` in `dJ(u)` to `tol`.
 *
 * # Safety
 * `u_tilde`, `u` and `p` must hold `n` values; `out` must be writable.
 */
enum VrStatus vr_bregman_distance(const struct VrRegularizer *reg,
                                  const double *u_tilde,
                                  const double *u,
                                  const double *p,
                                  size_t n,
                                  double tol,
                                  double *out);

/**
 * Minimizes `|Fu - v|^2 / 2 + alpha J(u)`. `tol <= 0` and `max_iters == 0`
 * select the defaults.
 *
 * # Safety
 * Handles must be live, `v` must hold `v_len` values and `out` must be
 * writable.
 */
enum VrStatus vr_solve(const struct VrOperator *op,
                       const struct VrRegularizer *reg,
                       const double *v,
                       size_t v_len,
                       double alpha,
                       double tol,
                       size_t max_iters,
                       struct VrSolution **out);

/**
 * # Safety
 * `sol` must come from [`vr_solve`] and not be used again.
 */
void vr_solution_free(struct VrSolution *sol);

/**
 * Length of `u_alpha`, 0 for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
size_t vr_solution_dim(const struct VrSolution *sol);

/**
 * # Safety
 * `out` must hold `n` values.
 */
enum VrStatus vr_solution_u(const struct VrSolution *sol, double *out, size_t n);

/**
 * Subgradient `p_alpha` certified at `u_alpha`.
 *
 * # Safety
 * `out` must hold `n` values.
 */
enum VrStatus vr_solution_p(const struct VrSolution *sol, double *out, size_t n);

/**
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum VrStatus vr_solution_objective(const struct VrSolution *sol, double *out);

/**
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum VrStatus vr_solution_defect(const struct VrSolution *sol, double *out);

/**
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum VrStatus vr_solution_iterations(const struct VrSolution *sol, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARREG_H */
