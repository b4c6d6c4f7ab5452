#ifndef MMIGM_H
#define MMIGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmigmMonitorKind {
  MMIGM_MONITOR_KIND_GRADIENT = 0,
  MMIGM_MONITOR_KIND_HESSIAN = 1,
  MMIGM_MONITOR_KIND_COMBINED = 2,
} MmigmMonitorKind;

/**
 * Built-in model problems.
 */
typedef enum MmigmProblem {
  /**
   * `u = sin x sin y` on `[-1, 1]^2`.
   */
  MMIGM_PROBLEM_CASE1_SINE = 0,
  /**
   * `u = tanh((0.25 - r) / 0.01)` on `[0, 1]^2`.
   */
  MMIGM_PROBLEM_CASE2_TANH = 1,
} MmigmProblem;

/**
 * Result code of every fallible call.
 */
typedef enum MmigmStatus {
  MMIGM_STATUS_OK = 0,
  MMIGM_STATUS_INVALID_ARGUMENT = 1,
  MMIGM_STATUS_CONFIG = 2,
  MMIGM_STATUS_SOLVER = 3,
  MMIGM_STATUS_MESH_WRAP = 4,
  MMIGM_STATUS_IO = 5,
  MMIGM_STATUS_NULL_POINTER = 6,
  MMIGM_STATUS_PANIC = 7,
} MmigmStatus;

/**
 * Opaque spline field (coefficients on a geometry's basis).
 */
typedef struct MmigmField MmigmField;

/**
 * Opaque NURBS geometry map.
 */
typedef struct MmigmGeometry MmigmGeometry;

/**
 * Opaque result of a moving-mesh run.
 */
typedef struct MmigmMoveMesh MmigmMoveMesh;

/**
 * Scalar callback `f(x, y, user_data)`.
 */
typedef double (*MmigmScalarFn)(double x, double y, void *user_data);

typedef struct MmigmNorms {
  double l2;
  double h1;
  double linf;
} MmigmNorms;

/**
 * Monitor `sqrt(epsilon + alpha |grad u|^2 + beta |hess u|^2)`; the
 * gradient and hessian kinds fix `epsilon = 1` and drop the other term.
 */
typedef struct MmigmMonitor {
  enum MmigmMonitorKind kind;
  double epsilon;
  double alpha;
  double beta;
  size_t smoothing;
} MmigmMonitor;

/**
 * Moving-mesh outer-loop settings. `tolerance <= 0` selects the default.
 */
typedef struct MmigmMoveMeshParams {
  double tau;
  double tolerance;
  size_t max_outer;
} MmigmMoveMeshParams;

typedef struct MmigmMoveMeshSummary {
  size_t dofs;
  size_t iterations;
  size_t mesh_updates;
  bool converged;
  struct MmigmNorms initial;
  struct MmigmNorms final_;
  double initial_max_abs;
  double final_max_abs;
  double min_jacobian;
} MmigmMoveMeshSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread; empty after a
 * successful call. The pointer stays valid until the next `mmigm_*` call on
 * the same thread.
 */
const char *mmigm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mmigm_version(void);

/**
 * Identity NURBS geometry on `[x0, x1] x [y0, y1]` with `elements` uniform
 * elements per direction, degree `degree` and interior knot multiplicity
 * `multiplicity` (1 gives maximal smoothness, `degree` gives C0).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MmigmStatus mmigm_geometry_new_uniform(double x0,
                                            double x1,
                                            double y0,
                                            double y1,
                                            size_t degree,
                                            size_t elements,
                                            size_t multiplicity,
                                            struct MmigmGeometry **out);

/**
 * # Safety
 * `g` must be null or a handle from this library that has not been freed.
 */
void mmigm_geometry_free(struct MmigmGeometry *g);

/**
 * Number of basis functions (degrees of freedom) of the geometry's space.
 *
 * # Safety
 * `g` must be a live geometry handle and `out` writable.
 */
enum MmigmStatus mmigm_geometry_num_dofs(const struct MmigmGeometry *g, size_t *out);

/**
 * Physical point `F(s, t)` and Jacobian determinant there.
 *
 * # Safety
 * `g` must be a live geometry handle; `x`, `y` and `det` must be writable.
 */
enum MmigmStatus mmigm_geometry_map(const struct MmigmGeometry *g,
                                    double s,
                                    double t,
                                    double *x,
                                    double *y,
                                    double *det);

/**
 * Smallest Jacobian determinant over the element quadrature points.
 *
 * # Safety
 * `g` must be a live geometry handle and `out` writable.
 */
enum MmigmStatus mmigm_geometry_min_jacobian(const struct MmigmGeometry *g, double *out);

/**
 * Solves `-Laplace(u) = source` with `u = boundary` on the geometry's
 * edges, using default solver settings.
 *
 * # Safety
 * `g` must be a live geometry handle, `out` writable, and the callbacks
 * safe to call with `user_data` for the duration of this call.
 */
enum MmigmStatus mmigm_solve_poisson(const struct MmigmGeometry *g,
                                     MmigmScalarFn source,
                                     MmigmScalarFn boundary,
                                     void *user_data,
                                     struct MmigmField **out);

/**
 * Solves a built-in model problem on `g`.
 *
 * # Safety
 * `g` must be a live geometry handle and `out` writable.
 */
enum MmigmStatus mmigm_solve_builtin(const struct MmigmGeometry *g,
                                     enum MmigmProblem problem,
                                     struct MmigmField **out);

/**
 * # Safety
 * `u` must be null or a handle from this library that has not been freed.
 */
void mmigm_field_free(struct MmigmField *u);

/**
 * Copies up to `len` coefficients into `buf` and stores the total count in
 * `count`. Pass `buf = NULL` to query the count only.
 *
 * # Safety
 * `u` must be a live field handle, `count` writable and `buf` (when not
 * null) valid for `len` writes.
 */
enum MmigmStatus mmigm_field_coefficients(const struct MmigmField *u,
                                          double *buf,
                                          size_t len,
                                          size_t *count);

/**
 * Value and physical gradient of `u` at parametric point `(s, t)`.
 *
 * # Safety
 * `g` and `u` must be live handles for matching spaces; outputs writable.
 */
enum MmigmStatus mmigm_field_eval(const struct MmigmGeometry *g,
                                  const struct MmigmField *u,
                                  double s,
                                  double t,
                                  double *value,
                                  double *dx,
                                  double *dy);

/**
 * L2, H1-seminorm and lattice max-norm errors of `u` against a built-in
 * problem's exact solution.
 *
 * # Safety
 * `g` and `u` must be live handles for matching spaces; `out` writable.
 */
enum MmigmStatus mmigm_error_norms(const struct MmigmGeometry *g,
                                   const struct MmigmField *u,
                                   enum MmigmProblem problem,
                                   struct MmigmNorms *out);

/**
 * Runs the moving-mesh iteration for a built-in problem starting from `g0`.
 *
 * # Safety
 * `g0` must be a live geometry handle, `monitor` and `params` readable and
 * `out` writable.
 */
enum MmigmStatus mmigm_movemesh_run(enum MmigmProblem problem,
                                    const struct MmigmGeometry *g0,
                                    const struct MmigmMonitor *monitor,
                                    const struct MmigmMoveMeshParams *params,
                                    struct MmigmMoveMesh **out);

/**
 * # Safety
 * `m` must be null or a handle from this library that has not been freed.
 */
void mmigm_movemesh_free(struct MmigmMoveMesh *m);

/**
 * Norms and diagnostics of a finished moving-mesh run.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum MmigmStatus mmigm_movemesh_summary(const struct MmigmMoveMesh *m,
                                        struct MmigmMoveMeshSummary *out);

/**
 * New handles holding copies of the final geometry and solution. Either
 * output may be null to skip it.
 *
 * # Safety
 * `m` must be a live handle; non-null outputs must be writable.
 */
enum MmigmStatus mmigm_movemesh_final(const struct MmigmMoveMesh *m,
                                      struct MmigmGeometry **geometry,
                                      struct MmigmField **solution);

/**
 * Runs the experiment described by the JSON config at `config_path`,
 * writing artifacts to `out_dir` (or the config's own directory when null).
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out_dir` null or one.
 */
enum MmigmStatus mmigm_run_config(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMIGM_H */
