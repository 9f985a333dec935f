#pragma once

#include "lqrac/critic.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lqrac {

// Theta_hat = smat(tail of vartheta_hat); returns Theta_hat_22 K - Theta_hat_21.
Matrix extract_natural_gradient(const Vector& vartheta_hat, const Policy& k, Eigen::Index n, Eigen::Index kk);

// K - 2 eta E_hat, with a freshly computed spectral radius.
Policy npg_step(const LinearSystem& sys, const Policy& k, const Matrix& e_hat, double eta);

enum class GradientMode { Oracle, Critic };

// Where the critic's schedule takes its ||H|| value from.
enum class HNormSource { Exact, Bound, Fixed };

struct CriticSettings {
    EpochConfig epochs;
    // Budget of the first evaluation, which starts from the initial guess (same as epochs when empty).
    std::optional<EpochConfig> first_epochs;
    HNormSource h_norm_source = HNormSource::Exact;
    NextAction next = NextAction::Sampled;
    bool warm_start = true;
    bool restart_per_policy = false;
    // Starting point of the very first evaluation (zero vector when empty).
    Vector initial_guess;
};

struct ActorConfig {
    std::optional<double> eta; // empty: 1 / (2 C1)
    long T = 0;
    double epsilon = 1e-3;
    GradientMode mode = GradientMode::Oracle;
    bool guards_enabled = true;
    bool oracle_diagnostics = true;
    CriticSettings critic;
};

struct ActorRow {
    long t = 0;
    double j = 0.0;
    double err = 0.0;        // J(K_t) - J(K*)
    double e_norm = 0.0;     // ||E_{K_t}||_F
    double delta_norm = 0.0; // ||E_hat_t - E_{K_t}||_F, NaN when unavailable
    double rho = 0.0;
    long samples = 0;
    double wall_seconds = 0.0;
    bool censored = false;
};

struct ActorTrace {
    std::vector<ActorRow> rows;
    std::vector<std::string> warnings;
    // Iterations at which a guard fired without stopping the run (critic mode).
    std::vector<long> flagged;
    bool diverged = false;
    std::string failure;
    double eta = 0.0;
    long l = 1;
    bool l_clamped = false;
    double rho_bar = 0.0;
    double jstar = 0.0;
};

struct TrainResult {
    Policy policy;
    ActorTrace trace;
};

TrainResult train(const LinearSystem& sys, const Policy& k0, const ActorConfig& config, std::uint64_t seed);

} // namespace lqrac
