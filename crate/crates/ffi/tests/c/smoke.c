#include <stdio.h>
#include <stdlib.h>
#include "kinetic_harris.h"

static const char *SCENARIO =
    "scenario = \"torus-bgk\"\n"
    "dim = 1\n"
    "particles = 2000\n"
    "t_final = 1.0\n"
    "seed = 3\n"
    "[initial]\n"
    "law = \"dirac\"\n"
    "x = [0.5]\n"
    "v = [1.0]\n"
    "[snapshots]\n"
    "count = 4\n";

int main(void) {
    KhScenario *s = NULL;
    if (kh_scenario_from_toml(SCENARIO, &s) != KH_STATUS_OK) {
        return 1;
    }
    KhRun *r = NULL;
    if (kh_run(s, &r) != KH_STATUS_OK) {
        return 2;
    }
    size_t n = 0;
    kh_run_len(r, &n);
    KhRow row;
    if (kh_run_row(r, n - 1, &row) != KH_STATUS_OK) {
        return 3;
    }
    if (kh_run_row(r, n, &row) != KH_STATUS_OUT_OF_RANGE) {
        return 4;
    }
    char msg[256];
    if (kh_last_error_message(msg, sizeof msg) != KH_STATUS_OK) {
        return 5;
    }
    printf("%zu %.3f %s\n", n, row.t, msg);
    kh_run_free(r);
    kh_scenario_free(s);
    return 0;
}
