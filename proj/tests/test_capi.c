/* Exercises the C API from plain C. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "pmns/pmns.h"

static int failures = 0;
#define EXPECT(c)                                              \
  do {                                                         \
    if (!(c)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #c); \
      ++failures;                                              \
    }                                                          \
  } while (0)

int main(void) {
  EXPECT(strlen(pmns_version()) > 0);

  pmns_field* f = NULL;
  EXPECT(pmns_field_create(27, 0.25, 3, "bernoulli", "random", &f) == PMNS_OK);
  EXPECT(pmns_field_subblock_count(f) == 472392);
  double xi[3] = {0.5, 0.3, 1.5}, v[6];
  EXPECT(pmns_field_value(f, xi, v) == PMNS_OK);
  double mag = 0;
  for (int i = 0; i < 6; ++i) mag += v[i] * v[i];
  EXPECT(mag > 0);
  double zero[3] = {0.0, 0.0, 0.05};
  EXPECT(pmns_field_value(f, zero, v) == PMNS_OK);
  EXPECT(v[0] == 0 && v[5] == 0);
  pmns_field_destroy(f);

  f = NULL;
  EXPECT(pmns_field_create(10, 0.25, 3, NULL, NULL, &f) == PMNS_EINVAL);
  EXPECT(f == NULL);
  EXPECT(strlen(pmns_last_error()) > 0);
  EXPECT(pmns_field_create(8, 0.25, 3, "gaussian", NULL, &f) == PMNS_EINVAL);

  pmns_run* r = NULL;
  EXPECT(pmns_run_open_json("{\"lattice\": {\"K\": 8}}", &r) == PMNS_OK);
  EXPECT(pmns_run_execute(r, "sample") == PMNS_EINVAL); /* no seed */
  EXPECT(strstr(pmns_last_error(), "run.seed") != NULL);
  EXPECT(pmns_run_set_threads(r, 0) == PMNS_EINVAL);
  EXPECT(pmns_run_execute(r, "nonsense") == PMNS_EINVAL);
  EXPECT(strcmp(pmns_run_directory(r), "") == 0);
  pmns_run_close(r);

  EXPECT(pmns_run_open_json("{not json", &r) == PMNS_EINVAL);
  EXPECT(pmns_report(NULL, 0, NULL, NULL, 0) == PMNS_EINVAL);

  if (failures == 0) puts("capi: all checks passed");
  return failures == 0 ? 0 : 1;
}
