#pragma once

#include "lqrac/moments.hpp"
#include "lqrac/oracle.hpp"

#include <cstdint>
#include <string>

namespace lqrac {

struct ReportOptions {
    double x0_norm = 0.0;
    // Monte Carlo draws for the measured noise levels; 0 skips them.
    long empirical_samples = 20000;
    std::uint64_t seed = 20240101;
};

struct ConstantsReport {
    // inputs
    double j0 = 0, jstar = 0, epsilon = 0, delta_star = 0;

    ActorConstants actor;
    long n_out = 0;

    // evaluation at K0
    BiasConstants bias;
    double h_norm = 0;
    double mu_lower = 0;
    double mu_exact = 0;
    double solution_norm = 0;

    double omega_x = 0, omega_y = 0;
    double d0 = 0, d_x = 0, d_y = 0;
    double m_x = 0, m_y = 0;
    double sigma_x = 0, sigma_y = 0;
    double o_x = 0, o_y = 0;

    // epoch schedule for the critic accuracy target
    double critic_epsilon = 0;
    double delta = 0;
    double tau = 0;
    long epochs = 0;
    double k_first = 0, k_last = 0, k_total = 0;
    double n_s = 0;          // order-only
    double n_in = 0;         // order-only
    double sample_bound = 0; // order-only

    // measured noise levels of the single-pair estimator at K0
    double sigma_x_empirical = 0, sigma_y_empirical = 0;

    // Stable key=value text, one entry per line, 17 significant digits.
    [[nodiscard]] std::string to_text() const;
};

ConstantsReport full_report(const LinearSystem& sys, const Policy& k0, const Optimum& opt, double epsilon,
                            double delta_star, const ReportOptions& options = {});

} // namespace lqrac
