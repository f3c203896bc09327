#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "hse.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    HseStatus s_ = (call);                                                 \
    if (s_ != HSE_STATUS_OK) {                                             \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, hse_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  HseSpace *space = NULL;
  HsePlan *plan = NULL;
  char *csv = NULL;
  double t_a50 = 0.0, e_c = 0.0, gain = 0.0;
  double costs[] = {1, 3, 2, 2, 3, 1, 2, 3};
  size_t front[4];
  size_t len = 0;

  CHECK(hse_space_builtin("fev", &space));
  CHECK(hse_plan_lhs(space, 8, 42, 1, &plan));
  if (hse_plan_len(plan) != 8) return 2;
  CHECK(hse_plan_to_csv(space, plan, &csv));
  if (strncmp(csv, "run_id,T_max,", 13) != 0) return 3;
  hse_string_free(csv);

  CHECK(hse_fev_evaluate(250, 400, 9, 0, 0, 0, &t_a50, &e_c));
  CHECK(hse_yaw_gain(5e4, 1, 100, 1, &gain));
  CHECK(hse_pareto_front(costs, 4, 2, NULL, front, &len));
  if (len != 3 || front[0] != 0 || front[1] != 1 || front[2] != 2) return 4;

  if (hse_space_builtin("nope", &space) != HSE_STATUS_INVALID_ARGUMENT) return 5;
  if (strstr(hse_last_error(), "nope") == NULL) return 6;

  printf("%.12f %.12f %.12f\n", t_a50, e_c, gain);
  hse_plan_free(plan);
  hse_space_free(space);
  return 0;
}
