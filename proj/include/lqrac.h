#ifndef LQRAC_H
#define LQRAC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(LQRAC_BUILDING)
#define LQRAC_API __attribute__((visibility("default")))
#else
#define LQRAC_API
#endif

typedef enum lqrac_status {
    LQRAC_OK = 0,
    LQRAC_INVALID_ARGUMENT = 1,
    LQRAC_DIMENSION_MISMATCH = 2,
    LQRAC_ASYMMETRIC_INPUT = 3,
    LQRAC_UNSTABLE_MATRIX = 4,
    LQRAC_UNSTABLE_POLICY = 5,
    LQRAC_UNSTABLE_INITIAL_POLICY = 6,
    LQRAC_NOT_CONTROLLABLE = 7,
    LQRAC_CONVERGENCE_FAILURE = 8,
    LQRAC_NUMERICAL_OVERFLOW = 9,
    LQRAC_INVALID_SCHEDULE = 10,
    LQRAC_EPOCH_BUDGET_EXCEEDED = 11,
    LQRAC_GUARD_VIOLATION = 12,
    LQRAC_CONFIG_ERROR = 13,
    LQRAC_IO_ERROR = 14,
    LQRAC_INTERNAL_ERROR = 99
} lqrac_status;

typedef struct lqrac_system lqrac_system;
typedef struct lqrac_config lqrac_config;

/* Message of the last failed call on this thread; empty after a success. */
LQRAC_API const char* lqrac_last_error(void);
LQRAC_API const char* lqrac_status_name(lqrac_status status);
LQRAC_API const char* lqrac_version(void);

/* Matrices are dense and row-major: a is n x n, b is n x k, q is n x n, r is k x k, psi is n x n. */
LQRAC_API lqrac_status lqrac_system_create(int n, int k, const double* a, const double* b, const double* q,
                                           const double* r, const double* psi, double sigma2, lqrac_system** out);
LQRAC_API void lqrac_system_free(lqrac_system* sys);
LQRAC_API lqrac_status lqrac_system_dims(const lqrac_system* sys, int* n, int* k);

/* p_out: n x n, k_out: k x n, either may be NULL. */
LQRAC_API lqrac_status lqrac_solve_dare(const lqrac_system* sys, double* p_out, double* k_out, double* j_out);
/* Average cost and closed-loop spectral radius of the gain (k x n, row-major). */
LQRAC_API lqrac_status lqrac_policy_cost(const lqrac_system* sys, const double* gain, double* j_out, double* rho_out);
/* Natural gradient (R + B^T P B) K - B^T P A, written k x n. */
LQRAC_API lqrac_status lqrac_natural_gradient(const lqrac_system* sys, const double* gain, double* e_out);

/* Configuration documents are JSON; see the README for the schema. */
LQRAC_API lqrac_status lqrac_config_default(lqrac_config** out);
LQRAC_API lqrac_status lqrac_config_parse(const char* json_text, const char* base_dir, lqrac_config** out);
LQRAC_API lqrac_status lqrac_config_load(const char* path, lqrac_config** out);
LQRAC_API void lqrac_config_free(lqrac_config* cfg);

LQRAC_API lqrac_status lqrac_config_set_seeds(lqrac_config* cfg, const uint64_t* seeds, size_t count);
LQRAC_API lqrac_status lqrac_config_set_output(lqrac_config* cfg, const char* dir);
/* "oracle" or "critic"; applies to training and to evaluation. */
LQRAC_API lqrac_status lqrac_config_set_mode(lqrac_config* cfg, const char* mode);
LQRAC_API lqrac_status lqrac_config_set_oracle_diagnostics(lqrac_config* cfg, int enabled);
/* "csv" or "json". */
LQRAC_API lqrac_status lqrac_config_set_format(lqrac_config* cfg, const char* format);
LQRAC_API lqrac_status lqrac_config_echo(const lqrac_config* cfg, char** out);

/* Commands return a newly allocated text in *out; release it with lqrac_string_free. */
LQRAC_API lqrac_status lqrac_cmd_solve(const lqrac_config* cfg, char** out);
LQRAC_API lqrac_status lqrac_cmd_constants(const lqrac_config* cfg, char** out);
LQRAC_API lqrac_status lqrac_cmd_evaluate(const lqrac_config* cfg, char** out);
LQRAC_API lqrac_status lqrac_cmd_train(const lqrac_config* cfg, char** out);
LQRAC_API lqrac_status lqrac_cmd_experiment(const lqrac_config* cfg, char** out);
/* Rebuilds the aggregate files of an experiment directory from its seed records. */
LQRAC_API lqrac_status lqrac_cmd_aggregate(const char* dir, char** out);

LQRAC_API void lqrac_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
