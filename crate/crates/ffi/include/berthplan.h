/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef BERTHPLAN_H
#define BERTHPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. The values of the first five match the CLI exit codes.
typedef enum BpStatus {
  BP_STATUS_OK = 0,
  BP_STATUS_NULL_POINTER = 1,
  BP_STATUS_PARSE = 2,
  BP_STATUS_SPEC_INVALID = 3,
  BP_STATUS_INFEASIBLE = 4,
  BP_STATUS_INTERNAL = 5,
  BP_STATUS_OUT_OF_RANGE = 6,
  BP_STATUS_INVALID_UTF8 = 7,
} BpStatus;

// Planning problem: transcription spec plus solver settings.
typedef struct BpProblem BpProblem;

// Solved trajectory.
typedef struct BpResult BpResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *bp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *bp_version(void);

// Loads a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum BpStatus bp_problem_from_scenario_file(const char *path, struct BpProblem **out);

// Reference case `id` (1 to 6) on the bundled ship and port.
//
// # Safety
// `out` must be a valid pointer.
enum BpStatus bp_problem_from_case(uint32_t id, bool speed_constraint, struct BpProblem **out);

// Sets the number of shooting segments (at least 2).
//
// # Safety
// `problem` must be a live handle.
enum BpStatus bp_problem_set_segments(struct BpProblem *problem, size_t segments);

// Enables or disables the speed corridor.
//
// # Safety
// `problem` must be a live handle.
enum BpStatus bp_problem_set_speed_constraint(struct BpProblem *problem, bool enabled);

// Sets the number of solver attempts (1 to 4) and the re-initialisation seed.
//
// # Safety
// `problem` must be a live handle.
enum BpStatus bp_problem_set_attempts(struct BpProblem *problem, size_t attempts, uint64_t seed);

// # Safety
// `problem` must be null or a handle not yet freed.
void bp_problem_free(struct BpProblem *problem);

// Solves the problem. On `BP_STATUS_OK` and `BP_STATUS_INFEASIBLE` a result
// handle is stored in `out`; an infeasible result still holds the last
// iterate.
//
// # Safety
// `problem` must be a live handle and `out` a valid pointer.
enum BpStatus bp_plan(const struct BpProblem *problem, struct BpResult **out);

// # Safety
// `result` must be null or a handle not yet freed.
void bp_result_free(struct BpResult *result);

// True when the solver reported a feasible point and the independent audit
// accepted it.
//
// # Safety
// `result` must be null or a live handle.
bool bp_result_feasible(const struct BpResult *result);

// Final time in seconds, or NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double bp_result_final_time(const struct BpResult *result);

// Largest constraint violation reported by the solver, or NaN.
//
// # Safety
// `result` must be null or a live handle.
double bp_result_max_violation(const struct BpResult *result);

// Number of knots (segments + 1), or 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t bp_result_knot_count(const struct BpResult *result);

// Writes knot `k` as (x, y, psi, u, v, r) in SI units and radians.
//
// # Safety
// `result` must be a live handle and `state` must point to 6 doubles.
enum BpStatus bp_result_knot(const struct BpResult *result, size_t k, double *state);

// Writes the command of segment `k` as (port rudder, starboard rudder,
// propeller, thruster) in radians and revolutions per second.
//
// # Safety
// `result` must be a live handle and `command` must point to 4 doubles.
enum BpStatus bp_result_command(const struct BpResult *result, size_t k, double *command);

// Speed corridor of the bundled ship at `distance` metres from the berth.
//
// # Safety
// `lower` and `upper` must be valid pointers.
enum BpStatus bp_speed_limits(double distance, double *lower, double *upper);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERTHPLAN_H */
