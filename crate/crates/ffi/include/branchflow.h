#ifndef BRANCHFLOW_H
#define BRANCHFLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; `BF_OK` is zero.
 */
typedef enum BfStatus {
  BF_OK = 0,
  BF_NULL_POINTER = 1,
  BF_DOMAIN = 2,
  BF_ADMISSIBILITY = 3,
  BF_RESOURCE = 4,
  BF_INPUT = 5,
  BF_GRID_MISMATCH = 6,
  BF_BLOWUP = 7,
  BF_INSUFFICIENT_REPLICAS = 8,
  BF_INVARIANT = 9,
  BF_CONFIG = 10,
  BF_PARSE = 11,
  BF_IO = 12,
  BF_PANIC = 13,
} BfStatus;

/**
 * Discrete family for one `k`, with its rate `sigma_k`.
 */
typedef struct BfDiscreteFamily BfDiscreteFamily;

/**
 * Continuum mechanism family `theta -> phi_theta`.
 */
typedef struct BfFamily BfFamily;

/**
 * Offspring law `p_0, p_1, ...`.
 */
typedef struct BfLaw BfLaw;

/**
 * A simulated path.
 */
typedef struct BfPath BfPath;

/**
 * Catalog parameters of
 * `phi_theta(z) = b0 z + c z^2/2 + gamma_m z^2/(rho_m(rho_m+z)) - theta (h z + gamma z/(rho+z))`.
 */
typedef struct BfCatalogParams {
  double b0;
  double c;
  double gamma_m;
  double rho_m;
  double h;
  double gamma;
  double rho;
} BfCatalogParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bf_version(void);

/**
 * Creates an offspring law from `len` probabilities.
 *
 * # Safety
 * `probs` must point to `len` doubles; `out` must be writable.
 */
enum BfStatus bf_law_new(const double *probs, size_t len, struct BfLaw **out_law);

/**
 * # Safety
 * `law` must come from `bf_law_new` (or be null) and not be used afterwards.
 */
void bf_law_free(struct BfLaw *law);

/**
 * Generating function `g(s)` for `s` in `[0, 1]`.
 *
 * # Safety
 * `law` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_law_pgf(const struct BfLaw *law, double s, double *out_value);

/**
 * Mean offspring number.
 *
 * # Safety
 * `law` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_law_mean(const struct BfLaw *law, double *out_value);

/**
 * Builds a named catalog family (`feller`, `nonlocal`, `jumps`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out_family` must be writable.
 */
enum BfStatus bf_family_from_catalog(const char *name, struct BfFamily **out_family);

/**
 * Builds a family from explicit parameters.
 *
 * # Safety
 * `out_family` must be writable.
 */
enum BfStatus bf_family_from_params(struct BfCatalogParams params, struct BfFamily **out_family);

/**
 * # Safety
 * `family` must come from a `bf_family_*` constructor (or be null).
 */
void bf_family_free(struct BfFamily *family);

/**
 * `phi_theta(z)` for `theta` in `[0, 1]`, `z >= 0`.
 *
 * # Safety
 * `family` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_family_phi_theta(const struct BfFamily *family,
                                  double theta,
                                  double z,
                                  double *out_value);

/**
 * Discretizes `family` at scale `k`; writes the handle and `sigma_k`.
 *
 * # Safety
 * `family` must be a live handle; the out pointers must be writable
 * (`out_sigma` may be null).
 */
enum BfStatus bf_discrete_family_build(const struct BfFamily *family,
                                       uint32_t k,
                                       struct BfDiscreteFamily **out_discrete,
                                       double *out_sigma);

/**
 * # Safety
 * `discrete` must come from `bf_discrete_family_build` (or be null).
 */
void bf_discrete_family_free(struct BfDiscreteFamily *discrete);

/**
 * Offspring law at the scaled level `theta` in `[0, k]`; a new handle.
 *
 * # Safety
 * `discrete` must be a live handle; `out_law` must be writable.
 */
enum BfStatus bf_discrete_law_at(const struct BfDiscreteFamily *discrete,
                                 double theta,
                                 struct BfLaw **out_law);

/**
 * Discrete mechanism `phi^(k)_theta(z)` for `theta` in `[0, 1]`.
 *
 * # Safety
 * `discrete` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_discrete_mechanism(const struct BfDiscreteFamily *discrete,
                                    double theta,
                                    double z,
                                    double *out_value);

/**
 * Simulates the single-level process; replica `replica` of `master_seed`.
 *
 * # Safety
 * `law` must be a live handle; `out_path` must be writable.
 */
enum BfStatus bf_simulate_single(const struct BfLaw *law,
                                 double sigma,
                                 uint64_t x0,
                                 double horizon,
                                 uint64_t master_seed,
                                 uint64_t replica,
                                 struct BfPath **out_path);

/**
 * Simulates the flow of a discrete family on `n_levels` levels in `(0, 1]`
 * with level scale `k`.
 *
 * # Safety
 * `levels` and `x0` must point to `n_levels` values; `out_path` must be writable.
 */
enum BfStatus bf_simulate_flow(const struct BfDiscreteFamily *discrete,
                               const double *levels,
                               const uint64_t *x0,
                               size_t n_levels,
                               double horizon,
                               uint64_t master_seed,
                               uint64_t replica,
                               struct BfPath **out_path);

/**
 * # Safety
 * `path` must come from a simulation or `bf_path_load` (or be null).
 */
void bf_path_free(struct BfPath *path);

/**
 * Number of levels of a path.
 *
 * # Safety
 * `path` must be a live handle or null (then 0).
 */
size_t bf_path_num_levels(const struct BfPath *path);

/**
 * Number of recorded events of a path.
 *
 * # Safety
 * `path` must be a live handle or null (then 0).
 */
size_t bf_path_num_events(const struct BfPath *path);

/**
 * Counts at time `t` (right-continuous), written to `out_counts[0..len]`;
 * `len` must equal the number of levels.
 *
 * # Safety
 * `path` must be a live handle; `out_counts` must hold `len` values.
 */
enum BfStatus bf_path_counts_at(const struct BfPath *path,
                                double t,
                                uint64_t *out_counts,
                                size_t len);

/**
 * Replays the path and writes whether every invariant holds.
 *
 * # Safety
 * `path` must be a live handle; `out_pass` must be writable.
 */
enum BfStatus bf_path_verify(const struct BfPath *path, bool *out_pass);

/**
 * Writes the path in the text path format.
 *
 * # Safety
 * `path` must be a live handle; `filename` a NUL-terminated string.
 */
enum BfStatus bf_path_save(const struct BfPath *path, const char *filename);

/**
 * Reads a path written by `bf_path_save` or the command-line tool.
 *
 * # Safety
 * `filename` must be a NUL-terminated string; `out_path` must be writable.
 */
enum BfStatus bf_path_load(const char *filename, struct BfPath **out_path);

/**
 * `E_1[s0^{X_t}]` of the single process, by the generating-function ODE.
 * A non-positive `step` selects the default.
 *
 * # Safety
 * `law` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_solve_pgf_ode(const struct BfLaw *law,
                               double sigma,
                               double t,
                               double s0,
                               double step,
                               double *out_value);

/**
 * Cumulant `v_t(lambda)` of the member `phi_theta` of a family.
 *
 * # Safety
 * `family` must be a live handle; `out_value` must be writable.
 */
enum BfStatus bf_solve_cb_cumulant(const struct BfFamily *family,
                                   double theta,
                                   double lambda,
                                   double t,
                                   double step,
                                   double *out_value);

/**
 * Nonlocal cumulant started from `sum_i lambdas[i] 1_[0, levels[i]]`,
 * evaluated at the levels; `intervals` sets the unit-grid resolution.
 *
 * # Safety
 * `levels`, `lambdas` and `out_values` must hold `n_levels` values.
 */
enum BfStatus bf_solve_nonlocal_step(const struct BfFamily *family,
                                     const double *levels,
                                     const double *lambdas,
                                     size_t n_levels,
                                     size_t intervals,
                                     double t,
                                     double step,
                                     double *out_values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRANCHFLOW_H */
