#ifndef NEHARI_H
#define NEHARI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum NlsStatus {
  NLS_STATUS_OK = 0,
  NLS_STATUS_NULL_POINTER = 1,
  NLS_STATUS_INVALID_UTF8 = 2,
  NLS_STATUS_CONFIG = 3,
  NLS_STATUS_DOMAIN = 4,
  NLS_STATUS_NUMERICAL_INPUT = 5,
  NLS_STATUS_GRID_MISMATCH = 6,
  NLS_STATUS_INTEGRATOR = 7,
  NLS_STATUS_IO = 8,
  NLS_STATUS_BUFFER_LENGTH = 9,
  NLS_STATUS_PANIC = 10,
} NlsStatus;

/*
 Parsed run configuration.
 */
typedef struct NlsConfig NlsConfig;

/*
 Result of a ground-state solve.
 */
typedef struct NlsSolution NlsSolution;

/*
 Scalar summary of a solve.
 */
typedef struct NlsSolveSummary {
  /*
   1 if the gradient and manifold tolerances were both met, else 0.
   */
  int32_t converged;
  size_t iterations;
  double i0_estimate;
  double grad_norm;
  double nehari_residual;
  double pde_residual_max;
  uint64_t seed;
} NlsSolveSummary;

/*
 Functional values at one state.
 */
typedef struct NlsBreakdown {
  /*
   `sigma1 |grad u|^2 + sigma2 |grad v|^2 + omega (u^2 + v^2)`, integrated.
   */
  double quadratic;
  /*
   `|u|^(p+1) + |v|^(p+1)`, integrated.
   */
  double power;
  /*
   `lambda u^2 v^2`, integrated.
   */
  double coupling;
  /*
   `I = L/2 - Mp/(p+1) - Nlam/2`.
   */
  double energy;
  /*
   `F = L - Mp - 2 Nlam`.
   */
  double nehari;
} NlsBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *nls_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *nls_version(void);

/*
 Parses a config in `section.key = value` form.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum NlsStatus nls_config_parse(const char *text, struct NlsConfig **out);

/*
 The built-in symmetric cubic benchmark config.

 # Safety
 `out` must be writable.
 */
enum NlsStatus nls_config_default(struct NlsConfig **out);

/*
 # Safety
 `config` must be null or a handle from this library, not yet freed.
 */
void nls_config_free(struct NlsConfig *config);

/*
 Overrides `solver.rng_seed`.

 # Safety
 `config` must be a live handle.
 */
enum NlsStatus nls_config_set_seed(struct NlsConfig *config, uint64_t seed);

/*
 Number of grid nodes, i.e. the length of every field buffer. Returns 0
 for a null handle.

 # Safety
 `config` must be null or a live handle.
 */
size_t nls_config_node_count(const struct NlsConfig *config);

/*
 Minimizes the energy over the Nehari manifold for the configured problem.
 A run that stops before the tolerances are met still succeeds; check
 `converged` in the summary.

 # Safety
 `config` must be a live handle; `out` must be writable.
 */
enum NlsStatus nls_solve(const struct NlsConfig *config, struct NlsSolution **out);

/*
 # Safety
 `solution` must be null or a handle from this library, not yet freed.
 */
void nls_solution_free(struct NlsSolution *solution);

/*
 Node count of the solution grid; 0 for a null handle.

 # Safety
 `solution` must be null or a live handle.
 */
size_t nls_solution_len(const struct NlsSolution *solution);

/*
 Copies the `u` and `v` fields into caller buffers of `len` values each.

 # Safety
 `solution` must be a live handle; `u` and `v` must each have room for
 `len` doubles.
 */
enum NlsStatus nls_solution_copy_fields(const struct NlsSolution *solution,
                                        double *u,
                                        double *v,
                                        size_t len);

/*
 # Safety
 `solution` must be a live handle; `out` must be writable.
 */
enum NlsStatus nls_solution_summary(const struct NlsSolution *solution,
                                    struct NlsSolveSummary *out);

/*
 The solve report as a JSON object, the same shape as the `solve` entry
 of `report.json`. Release the string with [`nls_string_free`].

 # Safety
 `solution` must be a live handle; `out` must be writable.
 */
enum NlsStatus nls_solution_report_json(const struct NlsSolution *solution, char **out);

/*
 # Safety
 `text` must be null or a string returned by this library, not yet freed.
 */
void nls_string_free(char *text);

/*
 Evaluates the functionals at a state on the config's grid.

 # Safety
 `config` must be a live handle; `u` and `v` must hold `len` doubles;
 `out` must be writable.
 */
enum NlsStatus nls_breakdown(const struct NlsConfig *config,
                             const double *u,
                             const double *v,
                             size_t len,
                             struct NlsBreakdown *out);

/*
 Scales the state in place onto the Nehari manifold and stores the scale
 factor in `t0_out` (may be null).

 # Safety
 `config` must be a live handle; `u` and `v` must hold `len` writable
 doubles.
 */
enum NlsStatus nls_project(const struct NlsConfig *config,
                           double *u,
                           double *v,
                           size_t len,
                           double *t0_out);

/*
 Strong-form gradient of the energy at a state, written into `gu`, `gv`.

 # Safety
 `config` must be a live handle; all four buffers must hold `len` doubles.
 */
enum NlsStatus nls_gradient(const struct NlsConfig *config,
                            const double *u,
                            const double *v,
                            size_t len,
                            double *gu,
                            double *gv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEHARI_H */
