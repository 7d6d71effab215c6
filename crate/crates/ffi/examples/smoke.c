/* Build: cargo build -p finpop-ffi
 *        cc smoke.c -I../include ../../../target/debug/libfinpop_ffi.a -lpthread -ldl -lm -o smoke */
#include <stdio.h>
#include "finpop.h"

int main(void) {
    double q = 0.0;
    if (finpop_tw1_quantile(0.95, &q) != FINPOP_STATUS_OK) {
        return 1;
    }
    FinpopEdgeParams ep;
    finpop_spearman_edge(1.0, &ep);

    double values[12] = {1, 2, 3, 4, 2, 1, 4, 3, 0, 1, 0, 2};
    FinpopMatrix *m = NULL;
    finpop_matrix_new(3, 4, values, &m);
    FinpopPaConfig cfg = finpop_pa_config_default(1, 0);
    cfg.method = FINPOP_METHOD_TW_DIRECT;
    FinpopPaResult *r = NULL;
    FinpopStatus st = finpop_pa_run(m, &cfg, &r);
    if (st != FINPOP_STATUS_OK) {
        char msg[256];
        finpop_last_error(msg, sizeof msg);
        fprintf(stderr, "pa failed: %s\n", msg);
        finpop_matrix_free(m);
        return 1;
    }
    char *json = finpop_pa_result_to_json(r);
    printf("finpop %s\nq95 = %.4f\nE+ = %.1f\n%s\n", finpop_version(), q, ep.e_plus, json);
    finpop_string_free(json);
    finpop_pa_result_free(r);
    finpop_matrix_free(m);
    return 0;
}
