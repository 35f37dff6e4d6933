/* Plans reference case 1 through the C ABI.
 *
 *   cargo build --release -p berthplan-ffi
 *   cc crates/ffi/examples/plan_case.c -Icrates/ffi/include \
 *      -Ltarget/release -lberthplan_ffi -o plan_case
 *   LD_LIBRARY_PATH=target/release ./plan_case
 */
#include <stdio.h>

#include "berthplan.h"

int main(void) {
  BpProblem *problem = NULL;
  if (bp_problem_from_case(1, true, &problem) != BP_STATUS_OK) {
    fprintf(stderr, "%s\n", bp_last_error_message());
    return 1;
  }
  BpResult *result = NULL;
  BpStatus status = bp_plan(problem, &result);
  if (result == NULL) {
    fprintf(stderr, "%s\n", bp_last_error_message());
    bp_problem_free(problem);
    return 1;
  }
  printf("berthplan %s: status %d, tf %.2f s, %zu knots\n", bp_version(), (int)status,
         bp_result_final_time(result), bp_result_knot_count(result));
  double state[6];
  for (size_t k = 0; k < bp_result_knot_count(result); k += 10) {
    bp_result_knot(result, k, state);
    printf("knot %2zu: x %8.3f  y %8.3f  u %6.3f\n", k, state[0], state[1], state[3]);
  }
  bp_result_free(result);
  bp_problem_free(problem);
  return status == BP_STATUS_OK ? 0 : 1;
}
