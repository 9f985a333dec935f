#include "lqrac.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                                                                   \
    do {                                                                                                               \
        if (!(cond)) {                                                                                                 \
            fprintf(stderr, "%s:%d: expectation failed: %s (%s)\n", __FILE__, __LINE__, #cond, lqrac_last_error());    \
            ++failures;                                                                                                \
        }                                                                                                              \
    } while (0)

static void scalar_system(void) {
    const double one = 1.0, hundred = 100.0, psi = 0.01;
    lqrac_system* sys = NULL;
    EXPECT(lqrac_system_create(1, 1, &one, &one, &hundred, &hundred, &psi, 0.01, &sys) == LQRAC_OK);
    int n = 0, k = 0;
    EXPECT(lqrac_system_dims(sys, &n, &k) == LQRAC_OK && n == 1 && k == 1);

    double p = 0, gain = 0, j = 0;
    EXPECT(lqrac_solve_dare(sys, &p, &gain, &j) == LQRAC_OK);
    EXPECT(fabs(gain - 0.6180339887498949) < 1e-12);
    EXPECT(fabs(j - 4.23606797749979) < 1e-10);
    EXPECT(lqrac_solve_dare(sys, NULL, NULL, &j) == LQRAC_OK);

    const double k1 = 1.0, khalf = 0.5, kbad = 2.5;
    double rho = 0;
    EXPECT(lqrac_policy_cost(sys, &k1, &j, &rho) == LQRAC_OK);
    EXPECT(fabs(j - 5.0) < 1e-12 && rho == 0.0);
    double e = 0;
    EXPECT(lqrac_natural_gradient(sys, &khalf, &e) == LQRAC_OK);
    EXPECT(fabs(e + 100.0 / 3.0) < 1e-9);
    EXPECT(lqrac_policy_cost(sys, &kbad, &j, &rho) == LQRAC_UNSTABLE_POLICY);
    EXPECT(strlen(lqrac_last_error()) > 0);
    lqrac_system_free(sys);
}

static void invalid_inputs(void) {
    const double a[4] = {1, 2, 0, 1}, b[2] = {0, 1}, q[4] = {1, 2, 0, 1}, r = 1, psi[4] = {1, 0, 0, 1};
    lqrac_system* sys = NULL;
    EXPECT(lqrac_system_create(2, 1, a, b, q, &r, psi, 0.01, &sys) == LQRAC_ASYMMETRIC_INPUT);
    EXPECT(sys == NULL);
    EXPECT(lqrac_system_create(0, 1, a, b, q, &r, psi, 0.01, &sys) != LQRAC_OK);
    EXPECT(lqrac_system_create(2, 1, NULL, b, q, &r, psi, 0.01, &sys) == LQRAC_INVALID_ARGUMENT);
    EXPECT(strcmp(lqrac_status_name(LQRAC_CONFIG_ERROR), "ConfigError") == 0);
    EXPECT(lqrac_version() != NULL);
    lqrac_system_free(NULL);
    lqrac_config_free(NULL);
    lqrac_string_free(NULL);
}

static void config_and_commands(void) {
    lqrac_config* cfg = NULL;
    EXPECT(lqrac_config_parse("{\"bogus\": 1}", ".", &cfg) == LQRAC_CONFIG_ERROR);
    EXPECT(cfg == NULL);
    EXPECT(lqrac_config_parse("{\"actor\": {\"T\": 5}}", ".", &cfg) == LQRAC_OK);
    const uint64_t seeds[2] = {11, 12};
    EXPECT(lqrac_config_set_seeds(cfg, seeds, 2) == LQRAC_OK);
    EXPECT(lqrac_config_set_mode(cfg, "oracle") == LQRAC_OK);
    EXPECT(lqrac_config_set_mode(cfg, "sideways") == LQRAC_CONFIG_ERROR);
    EXPECT(lqrac_config_set_format(cfg, "json") == LQRAC_OK);

    char* text = NULL;
    EXPECT(lqrac_config_echo(cfg, &text) == LQRAC_OK);
    EXPECT(text != NULL && strstr(text, "\"T\": 5") != NULL);
    lqrac_string_free(text);

    text = NULL;
    EXPECT(lqrac_cmd_solve(cfg, &text) == LQRAC_OK);
    EXPECT(text != NULL && strstr(text, "4.23606") != NULL);
    lqrac_string_free(text);

    EXPECT(lqrac_config_set_format(cfg, "csv") == LQRAC_OK);
    text = NULL;
    EXPECT(lqrac_cmd_train(cfg, &text) == LQRAC_OK);
    EXPECT(text != NULL && strstr(text, "t,J,err") != NULL);
    lqrac_string_free(text);

    text = NULL;
    EXPECT(lqrac_config_set_output(cfg, "") == LQRAC_OK);
    EXPECT(lqrac_cmd_experiment(cfg, &text) == LQRAC_CONFIG_ERROR);
    EXPECT(text == NULL);
    lqrac_config_free(cfg);

    EXPECT(lqrac_cmd_aggregate("/nonexistent/lqrac/dir", &text) != LQRAC_OK);
}

int main(void) {
    scalar_system();
    invalid_inputs();
    config_and_commands();
    if (failures) {
        fprintf(stderr, "%d expectation(s) failed\n", failures);
        return EXIT_FAILURE;
    }
    puts("capi: all expectations met");
    return EXIT_SUCCESS;
}
