#pragma once

#include "lqrac/oracle.hpp"

#include <span>
#include <vector>

namespace lqrac {

// E[prod_j X_{i_j}] for X ~ N(0, sigma), summed over pair partitions.
// Odd-length index lists give 0.
double isserlis_moment(const Matrix& sigma, std::span<const Eigen::Index> indices);

// Same for X ~ N(mu, sigma): expands over subsets that take the mean.
double gaussian_moment(const Vector& mu, const Matrix& sigma, std::span<const Eigen::Index> indices);

// How the action inside the next-step feature is formed.
//  Sampled: the action actually played at x', i.e. -K x' + v'.
//  Greedy:  the noiseless action -K x'.
enum class NextAction { Sampled, Greedy };

// Joint law of (z_t, z_{t+1}) with z = (x, u), stacked as a 2(n+k) vector.
struct JointGaussian {
    Vector mean;
    Matrix cov;
};

// Builds the pair law when x_t ~ N(mean_x, cov_x) and u_t = -K x_t + v_t.
JointGaussian pair_law(const LinearSystem& sys, const Policy& k, const Vector& mean_x, const Matrix& cov_x,
                       NextAction next = NextAction::Sampled);

struct StationaryModel {
    Matrix sigma_tilde; // Cov(z_t) under the stationary law
    Matrix cross_cov;   // Cov(z_t, z_{t+1})
    JointGaussian pair;
    double rho = 0.0;
};

StationaryModel stationary_model(const LinearSystem& sys, const Policy& k, NextAction next = NextAction::Sampled);

// Covariance of x_t given a fixed x_0: sum_{p < t} F^p W F^{pT}.
Matrix state_cov_after(const LinearSystem& sys, const Policy& k, long t);

// Block covariance of (x_t, u_t) built from a state covariance.
Matrix state_action_cov(const LinearSystem& sys, const Policy& k, const Matrix& state_cov);

struct BellmanSystem {
    Matrix h;
    Vector b;
    bool exact = true;
};

// Expected (H, b) of the single-pair estimator when the pair has the given law.
BellmanSystem bellman_from_pair_law(const LinearSystem& sys, const JointGaussian& law);

BellmanSystem exact_bellman_system(const LinearSystem& sys, const Policy& k, NextAction next = NextAction::Sampled);

// E[(H~, b~) | x_0] for the pair (z_{tau-1}, z_tau) of a chain started at x_0.
BellmanSystem conditional_bellman_system(const LinearSystem& sys, const Policy& k, const Vector& x0, long tau,
                                         NextAction next = NextAction::Sampled);

double bellman_residual(const BellmanSystem& bs, const Vector& x);

double sharpness_lower_bound(const LinearSystem& sys, const Policy& k);

// Threshold T with P{||l||^2 > T} <= delta for l ~ N(mu, sigma).
double gaussian_norm_tail(const Vector& mu, const Matrix& sigma, double delta);

struct BiasConstants {
    double m_h = 0, m_b = 0;
    double r_star = 0;
    double l_h = 0, b_bound = 0;
    double c = 0;
    double o_h = 0, o_b = 0;
    double rho = 0;
    // ||F^p|| <= gamma * rho_star^p for every p, with rho_star = (1 + rho) / 2.
    double mixing_gamma = 0;
    double mixing_rho = 0;
    double mixing_prefactor = 0;
    double delta = 0;

    // C M (ln(e/delta))^beta rho^tau + O sqrt(delta), beta = 5/4.
    [[nodiscard]] double h_bias_envelope(long tau) const;
    [[nodiscard]] double b_bias_envelope(long tau) const;
};

BiasConstants bias_constants(const LinearSystem& sys, const Policy& k, double x0_norm, double delta);

// Fitted mixing constant: max_p ||F^p|| / rate^p over p = 0..horizon.
double fit_mixing_gamma(const Matrix& f, double rate, long horizon = 2000);

// Radius of the high-probability event for the t-th state-action pair of a
// chain started at (x0, u0).
double event_threshold(const LinearSystem& sys, const Policy& k, long t, double x0u0_sq_norm, double delta);

} // namespace lqrac
