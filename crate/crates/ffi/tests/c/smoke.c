#include <stdio.h>
#include <string.h>
#include "tsch_cluster.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            const char *e = tc_last_error();                     \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, \
                    e ? e : "no error");                         \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    TcScenario *sc = NULL;
    CHECK(tc_scenario_builtin("far_children", &sc) == TC_STATUS_OK);
    CHECK(tc_scenario_node_count(sc) == 3);

    TcVerifyResult v;
    CHECK(tc_verify(sc, 0, &v) == TC_STATUS_OK);
    CHECK(v.verdict == TC_VERDICT_HOLDS);
    CHECK(v.witness_slots == 8);

    uint64_t best = 0;
    CHECK(tc_sweep_min_witness(sc, 0, &best) == TC_STATUS_OK);
    CHECK(best == 8);

    TcRun *run = NULL;
    CHECK(tc_simulate(sc, 1, 100, &run) == TC_STATUS_OK);
    CHECK(tc_run_formed(run));
    char *trace = NULL;
    CHECK(tc_run_trace(run, &trace) == TC_STATUS_OK);
    CHECK(strncmp(trace, "# tsch-cluster trace", 20) == 0);
    tc_string_free(trace);
    tc_run_free(run);
    tc_scenario_free(sc);

    CHECK(tc_scenario_builtin("missing", &sc) == TC_STATUS_NOT_FOUND);
    CHECK(tc_last_error() != NULL);

    uint64_t slots = 0;
    CHECK(tc_lower_bound_slots(8, &slots) == TC_STATUS_OK);
    CHECK(slots == 1608);
    printf("ok\n");
    return 0;
}
