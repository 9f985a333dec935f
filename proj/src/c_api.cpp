#include "lqrac.h"

#include "lqrac/error.hpp"
#include "lqrac/harness.hpp"
#include "lqrac/oracle.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

struct lqrac_system {
    lqrac::LinearSystem sys;
};

struct lqrac_config {
    lqrac::harness::RunConfig cfg;
};

namespace {

thread_local std::string last_error;

lqrac_status status_of(lqrac::ErrorCode code) {
    using lqrac::ErrorCode;
    switch (code) {
    case ErrorCode::InvalidArgument: return LQRAC_INVALID_ARGUMENT;
    case ErrorCode::DimensionMismatch: return LQRAC_DIMENSION_MISMATCH;
    case ErrorCode::AsymmetricInput: return LQRAC_ASYMMETRIC_INPUT;
    case ErrorCode::UnstableMatrix: return LQRAC_UNSTABLE_MATRIX;
    case ErrorCode::UnstablePolicy: return LQRAC_UNSTABLE_POLICY;
    case ErrorCode::UnstableInitialPolicy: return LQRAC_UNSTABLE_INITIAL_POLICY;
    case ErrorCode::NotControllable: return LQRAC_NOT_CONTROLLABLE;
    case ErrorCode::ConvergenceFailure: return LQRAC_CONVERGENCE_FAILURE;
    case ErrorCode::NumericalOverflow: return LQRAC_NUMERICAL_OVERFLOW;
    case ErrorCode::InvalidSchedule: return LQRAC_INVALID_SCHEDULE;
    case ErrorCode::EpochBudgetExceeded: return LQRAC_EPOCH_BUDGET_EXCEEDED;
    case ErrorCode::GuardViolation: return LQRAC_GUARD_VIOLATION;
    case ErrorCode::ConfigError: return LQRAC_CONFIG_ERROR;
    case ErrorCode::IoError: return LQRAC_IO_ERROR;
    }
    return LQRAC_INTERNAL_ERROR;
}

template <class F>
lqrac_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return LQRAC_OK;
    } catch (const lqrac::Error& e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return LQRAC_INTERNAL_ERROR;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LQRAC_INTERNAL_ERROR;
    } catch (...) {
        last_error = "unknown failure";
        return LQRAC_INTERNAL_ERROR;
    }
}

void require(bool ok, const char* what) {
    if (!ok) lqrac::fail(lqrac::ErrorCode::InvalidArgument, what);
}

lqrac::Matrix read_matrix(const double* data, int rows, int cols) {
    lqrac::Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
    return m;
}

void write_matrix(const lqrac::Matrix& m, double* out) {
    const auto cols = m.cols();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < cols; ++j) out[i * cols + j] = m(i, j);
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class F>
lqrac_status run_command(const lqrac_config* cfg, char** out, F&& command) {
    return guarded([&] {
        require(cfg != nullptr && out != nullptr, "config and output pointer are required");
        *out = nullptr;
        *out = copy_string(command(cfg->cfg));
    });
}

} // namespace

extern "C" {

const char* lqrac_last_error(void) { return last_error.c_str(); }

const char* lqrac_status_name(lqrac_status status) {
    switch (status) {
    case LQRAC_OK: return "Ok";
    case LQRAC_INTERNAL_ERROR: return "InternalError";
    default: break;
    }
    if (status >= LQRAC_INVALID_ARGUMENT && status <= LQRAC_IO_ERROR)
        return lqrac::to_string(static_cast<lqrac::ErrorCode>(status - 1)).data();
    return "Unknown";
}

const char* lqrac_version(void) { return "1.0.0"; }

lqrac_status lqrac_system_create(int n, int k, const double* a, const double* b, const double* q, const double* r,
                                 const double* psi, double sigma2, lqrac_system** out) {
    return guarded([&] {
        require(out != nullptr, "output pointer is required");
        *out = nullptr;
        require(n >= 1 && k >= 1, "dimensions must be positive");
        require(a && b && q && r && psi, "matrix pointers must not be null");
        *out = new lqrac_system{lqrac::LinearSystem(read_matrix(a, n, n), read_matrix(b, n, k), read_matrix(q, n, n),
                                                    read_matrix(r, k, k), read_matrix(psi, n, n), sigma2)};
    });
}

void lqrac_system_free(lqrac_system* sys) { delete sys; }

lqrac_status lqrac_system_dims(const lqrac_system* sys, int* n, int* k) {
    return guarded([&] {
        require(sys != nullptr, "system is required");
        if (n) *n = static_cast<int>(sys->sys.n());
        if (k) *k = static_cast<int>(sys->sys.k());
    });
}

lqrac_status lqrac_solve_dare(const lqrac_system* sys, double* p_out, double* k_out, double* j_out) {
    return guarded([&] {
        require(sys != nullptr, "system is required");
        const lqrac::Optimum opt = lqrac::optimum(sys->sys);
        if (p_out) write_matrix(opt.riccati.p, p_out);
        if (k_out) write_matrix(opt.riccati.k, k_out);
        if (j_out) *j_out = opt.quantities.j;
    });
}

lqrac_status lqrac_policy_cost(const lqrac_system* sys, const double* gain, double* j_out, double* rho_out) {
    return guarded([&] {
        require(sys != nullptr && gain != nullptr, "system and gain are required");
        const auto n = static_cast<int>(sys->sys.n());
        const auto k = static_cast<int>(sys->sys.k());
        const lqrac::Policy pol(sys->sys, read_matrix(gain, k, n));
        if (rho_out) *rho_out = pol.rho();
        if (j_out) *j_out = lqrac::policy_quantities(sys->sys, pol).j;
    });
}

lqrac_status lqrac_natural_gradient(const lqrac_system* sys, const double* gain, double* e_out) {
    return guarded([&] {
        require(sys != nullptr && gain != nullptr && e_out != nullptr, "system, gain and output are required");
        const auto n = static_cast<int>(sys->sys.n());
        const auto k = static_cast<int>(sys->sys.k());
        const lqrac::Policy pol(sys->sys, read_matrix(gain, k, n));
        write_matrix(lqrac::policy_quantities(sys->sys, pol).e, e_out);
    });
}

lqrac_status lqrac_config_default(lqrac_config** out) {
    return guarded([&] {
        require(out != nullptr, "output pointer is required");
        *out = new lqrac_config{lqrac::harness::default_config()};
    });
}

lqrac_status lqrac_config_parse(const char* json_text, const char* base_dir, lqrac_config** out) {
    return guarded([&] {
        require(out != nullptr && json_text != nullptr, "text and output pointer are required");
        *out = nullptr;
        *out = new lqrac_config{lqrac::harness::parse_config(json_text, base_dir ? base_dir : ".")};
    });
}

lqrac_status lqrac_config_load(const char* path, lqrac_config** out) {
    return guarded([&] {
        require(out != nullptr && path != nullptr, "path and output pointer are required");
        *out = nullptr;
        *out = new lqrac_config{lqrac::harness::load_config(path)};
    });
}

void lqrac_config_free(lqrac_config* cfg) { delete cfg; }

lqrac_status lqrac_config_set_seeds(lqrac_config* cfg, const uint64_t* seeds, size_t count) {
    return guarded([&] {
        require(cfg != nullptr && seeds != nullptr && count > 0, "config and at least one seed are required");
        cfg->cfg.seeds.assign(seeds, seeds + count);
    });
}

lqrac_status lqrac_config_set_output(lqrac_config* cfg, const char* dir) {
    return guarded([&] {
        require(cfg != nullptr && dir != nullptr, "config and directory are required");
        cfg->cfg.output = dir;
    });
}

lqrac_status lqrac_config_set_mode(lqrac_config* cfg, const char* mode) {
    return guarded([&] {
        require(cfg != nullptr && mode != nullptr, "config and mode are required");
        const std::string m = mode;
        if (m == "oracle") {
            cfg->cfg.actor.mode = lqrac::GradientMode::Oracle;
        } else if (m == "critic") {
            cfg->cfg.actor.mode = lqrac::GradientMode::Critic;
        } else {
            lqrac::fail(lqrac::ErrorCode::ConfigError, "mode must be oracle or critic");
        }
        cfg->cfg.evaluate_mode = cfg->cfg.actor.mode;
    });
}

lqrac_status lqrac_config_set_oracle_diagnostics(lqrac_config* cfg, int enabled) {
    return guarded([&] {
        require(cfg != nullptr, "config is required");
        cfg->cfg.actor.oracle_diagnostics = enabled != 0;
    });
}

lqrac_status lqrac_config_set_format(lqrac_config* cfg, const char* format) {
    return guarded([&] {
        require(cfg != nullptr && format != nullptr, "config and format are required");
        const std::string f = format;
        if (f == "csv") {
            cfg->cfg.format = lqrac::harness::OutputFormat::Csv;
        } else if (f == "json") {
            cfg->cfg.format = lqrac::harness::OutputFormat::Json;
        } else {
            lqrac::fail(lqrac::ErrorCode::ConfigError, "format must be csv or json");
        }
    });
}

lqrac_status lqrac_config_echo(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, [](const lqrac::harness::RunConfig& c) { return c.echo(); });
}

lqrac_status lqrac_cmd_solve(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, lqrac::harness::cmd_solve);
}

lqrac_status lqrac_cmd_constants(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, lqrac::harness::cmd_constants);
}

lqrac_status lqrac_cmd_evaluate(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, lqrac::harness::cmd_evaluate);
}

lqrac_status lqrac_cmd_train(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, lqrac::harness::cmd_train);
}

lqrac_status lqrac_cmd_experiment(const lqrac_config* cfg, char** out) {
    return run_command(cfg, out, lqrac::harness::cmd_experiment);
}

lqrac_status lqrac_cmd_aggregate(const char* dir, char** out) {
    return guarded([&] {
        require(dir != nullptr && out != nullptr, "directory and output pointer are required");
        *out = nullptr;
        *out = copy_string(lqrac::harness::reaggregate(dir));
    });
}

void lqrac_string_free(char* s) { std::free(s); }

} // extern "C"
