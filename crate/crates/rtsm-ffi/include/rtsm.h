#ifndef RTSM_H
#define RTSM_H

/* Generated by cbindgen from rtsm-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RtsmStatus {
  RTSM_STATUS_OK = 0,
  RTSM_STATUS_NULL_POINTER = 1,
  RTSM_STATUS_INVALID_ARGUMENT = 2,
  RTSM_STATUS_PARSE = 3,
  RTSM_STATUS_SOLVE = 4,
  RTSM_STATUS_NOT_OPTIMAL = 5,
  RTSM_STATUS_BUFFER_TOO_SMALL = 6,
  RTSM_STATUS_PANIC = 7,
} RtsmStatus;

typedef enum RtsmPolicy {
  RTSM_POLICY_N1_BENCHMARK = 0,
  RTSM_POLICY_SEVERITY = 1,
} RtsmPolicy;

/**
 * Opaque case handle.
 */
typedef struct RtsmCase RtsmCase;

/**
 * Opaque solve result handle.
 */
typedef struct RtsmRun RtsmRun;

/**
 * Expected cost components of a solved strategy (EUR).
 */
typedef struct RtsmCosts {
  double preventive;
  double expected_corrective;
  double expected_severity;
} RtsmCosts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; valid until the next call.
 */
const char *rtsm_last_error(void);

/**
 * Loads a builtin fixture (`irep-3bus`, `irep-6bus`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RtsmStatus rtsm_case_builtin(const char *name, struct RtsmCase **out);

/**
 * Loads a case file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RtsmStatus rtsm_case_load(const char *path, struct RtsmCase **out);

/**
 * # Safety
 * `case` must come from `rtsm_case_builtin`/`rtsm_case_load` or be null.
 */
void rtsm_case_free(struct RtsmCase *case_);

/**
 * Number of generators, 0 for a null handle.
 *
 * # Safety
 * `case` must be a live handle or null.
 */
uintptr_t rtsm_case_num_generators(const struct RtsmCase *case_);

/**
 * Optimizes the case. A NaN `s_max` leaves the severity threshold inactive.
 * Returns `NotOptimal` (with the handle still written) when the search ends
 * without a proven optimum.
 *
 * # Safety
 * `case` must be a live handle and `out` a valid pointer.
 */
enum RtsmStatus rtsm_solve(const struct RtsmCase *case_,
                           enum RtsmPolicy policy,
                           double s_max,
                           double epsilon,
                           double p_fail,
                           struct RtsmRun **out);

/**
 * # Safety
 * `run` must come from `rtsm_solve` or be null.
 */
void rtsm_run_free(struct RtsmRun *run);

/**
 * Objective value of the solved model.
 *
 * # Safety
 * `run` must be a live handle or null (NaN is returned).
 */
double rtsm_run_objective(const struct RtsmRun *run);

/**
 * Copies the preventive dispatch (MW) into `buf`, which must hold at least
 * one value per generator.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum RtsmStatus rtsm_run_preventive(const struct RtsmRun *run, double *buf, uintptr_t len);

/**
 * Cost components of the solved strategy as evaluated by the oracle.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RtsmStatus rtsm_run_costs(const struct RtsmRun *run, struct RtsmCosts *out);

/**
 * Severity table as CSV; release with `rtsm_string_free`. Null on failure.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
char *rtsm_run_severity_csv(const struct RtsmRun *run);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void rtsm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTSM_H */
