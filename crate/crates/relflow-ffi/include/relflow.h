#ifndef RELFLOW_H
#define RELFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  RELFLOW_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RELFLOW_NULL_POINTER = 1,
  /**
   * Invalid configuration or parameter (bad law exponent, unknown
   * scenario, malformed UTF-8, undersized buffer).
   */
  RELFLOW_INVALID_ARGUMENT = 2,
  /**
   * The solver or a certification routine failed numerically.
   */
  RELFLOW_NUMERICAL_ERROR = 3,
} RelflowStatus;

/**
 * Opaque barotropic pressure law p(rho) = a rho^gamma.
 */
typedef struct RelflowLaw RelflowLaw;

/**
 * Opaque completed scenario run: trajectory, energy ledger, and the
 * ingredients needed for certification.
 */
typedef struct RelflowRun RelflowRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread, or null if none.
 * The pointer is invalidated by the next failing call on the same thread.
 */
const char *relflow_last_error(void);

/**
 * Creates a pressure law with coefficient `a > 0` and exponent
 * `gamma` in (1, 2]. On success writes the handle to `out`.
 */
RelflowStatus relflow_law_new(double a, double gamma, RelflowLaw **out);

/**
 * Releases a law handle. Null is a no-op.
 */
void relflow_law_free(RelflowLaw *law);

/**
 * Evaluates p(rho). `rho` must be nonnegative.
 */
RelflowStatus relflow_law_pressure(const RelflowLaw *law, double rho, double *out);

/**
 * Evaluates the Bregman pressure distance between `rho` and the reference
 * value `r > 0`; nonnegative, zero only at `rho == r`.
 */
RelflowStatus relflow_law_bregman(const RelflowLaw *law, double rho, double r, double *out);

/**
 * Runs a named scenario preset (`viscous-relaxation`, `equilibrium-vacuum`,
 * `compact-support`, `polynomial-decay`, `inflow-channel`) on `n_cells`
 * cells up to time `t_end` and returns the completed run.
 */
RelflowStatus relflow_run_scenario(const char *name,
                                   uintptr_t n_cells,
                                   double t_end,
                                   RelflowRun **out);

/**
 * Releases a run handle. Null is a no-op.
 */
void relflow_run_free(RelflowRun *run);

/**
 * Number of cells in the run's grid; 0 for a null handle.
 */
uintptr_t relflow_run_n_cells(const RelflowRun *run);

/**
 * Final simulated time; NaN for a null handle.
 */
double relflow_run_final_time(const RelflowRun *run);

/**
 * Copies the final density field into `buf` (capacity `len`). Fails with
 * `RelflowInvalidArgument` if the buffer is smaller than the grid.
 */
RelflowStatus relflow_run_final_density(const RelflowRun *run, double *buf, uintptr_t len);

/**
 * Total discrete energy at the end of the run; NaN for a null handle.
 */
double relflow_run_final_energy(const RelflowRun *run);

/**
 * Certifies the run against the scenario's built-in reference solution.
 * Writes 1 to `pass` when the relative-energy bound holds at every sample,
 * 0 otherwise, and the worst margin to `margin`.
 */
RelflowStatus relflow_run_certify(const RelflowRun *run, int32_t *pass, double *margin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELFLOW_H */
