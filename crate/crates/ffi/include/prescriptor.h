#ifndef PRESCRIPTOR_H
#define PRESCRIPTOR_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum PrescriptorStatus {
  PRESCRIPTOR_STATUS_OK = 0,
  PRESCRIPTOR_STATUS_NULL_POINTER = 1,
  PRESCRIPTOR_STATUS_INVALID_INPUT = 2,
  PRESCRIPTOR_STATUS_INFEASIBLE = 3,
  PRESCRIPTOR_STATUS_UNBOUNDED = 4,
  PRESCRIPTOR_STATUS_RESOURCE_LIMIT = 5,
  PRESCRIPTOR_STATUS_SOLVER_FAILURE = 6,
  PRESCRIPTOR_STATUS_IO = 7,
  PRESCRIPTOR_STATUS_BUFFER_TOO_SMALL = 8,
  PRESCRIPTOR_STATUS_PANIC = 9,
} PrescriptorStatus;

/**
 * A validated problem instance with its fitted weight models.
 */
typedef struct PrescriptorInstance PrescriptorInstance;

/**
 * Result of a solve.
 */
typedef struct PrescriptorSolution PrescriptorSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *prescriptor_version(void);

/**
 * Message of the last failing call on this thread, or NULL. Valid until the next failing call.
 */
const char *prescriptor_last_error(void);

/**
 * Parses an instance from JSON and fits its weight models with `seed`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PrescriptorStatus prescriptor_instance_from_json(const char *json,
                                                      uint64_t seed,
                                                      struct PrescriptorInstance **out);

/**
 * # Safety
 * `instance` must come from [`prescriptor_instance_from_json`] and not be used afterwards. NULL is ignored.
 */
void prescriptor_instance_free(struct PrescriptorInstance *instance);

/**
 * Number of stages minus one.
 *
 * # Safety
 * `instance` must be a live handle or NULL (returns 0).
 */
size_t prescriptor_instance_horizon(const struct PrescriptorInstance *instance);

/**
 * # Safety
 * `instance` must be a live handle or NULL (returns 0).
 */
size_t prescriptor_instance_samples(const struct PrescriptorInstance *instance);

/**
 * Stage-`stage` weights at covariate `x` (length `dim`) into `out` (capacity `cap`);
 * `len` receives the number of training samples.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum PrescriptorStatus prescriptor_weights(const struct PrescriptorInstance *instance,
                                           size_t stage,
                                           const double *x,
                                           size_t dim,
                                           double *out,
                                           size_t cap,
                                           size_t *len);

/**
 * Solves the extensive form on the weighted scenario tree.
 *
 * # Safety
 * `instance` must be a live handle and `out` a valid pointer.
 */
enum PrescriptorStatus prescriptor_solve_exact(const struct PrescriptorInstance *instance,
                                               struct PrescriptorSolution **out);

/**
 * Runs SDDP. `config_json` is an optional JSON object of solver settings
 * (`forward_samples`, `alpha`, `gap_tol`, `max_iter`, `cut_families`, ...); NULL uses defaults.
 *
 * # Safety
 * `instance` must be a live handle, `config_json` NULL or NUL-terminated, `out` valid.
 */
enum PrescriptorStatus prescriptor_solve_sddp(const struct PrescriptorInstance *instance,
                                              const char *config_json,
                                              struct PrescriptorSolution **out);

/**
 * # Safety
 * `solution` must come from a solve call and not be used afterwards. NULL is ignored.
 */
void prescriptor_solution_free(struct PrescriptorSolution *solution);

/**
 * Objective (SDDP: final lower bound). NaN for NULL.
 *
 * # Safety
 * `solution` must be a live handle or NULL.
 */
double prescriptor_solution_objective(const struct PrescriptorSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle or NULL.
 */
enum PrescriptorStatus prescriptor_solution_bounds(const struct PrescriptorSolution *solution,
                                                   double *lower,
                                                   double *upper);

/**
 * SDDP iterations run; 0 for exact solves or NULL.
 *
 * # Safety
 * `solution` must be a live handle or NULL.
 */
size_t prescriptor_solution_iterations(const struct PrescriptorSolution *solution);

/**
 * Copies the stage-0 decision into `out` (capacity `cap`); `len` receives its length.
 * Call with `cap = 0` to query the length.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum PrescriptorStatus prescriptor_solution_first_stage(const struct PrescriptorSolution *solution,
                                                        double *out,
                                                        size_t cap,
                                                        size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRESCRIPTOR_H */
