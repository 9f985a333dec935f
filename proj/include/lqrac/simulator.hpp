#pragma once

#include "lqrac/moments.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace lqrac {

// 64-bit Mersenne Twister with a fixed uniform and normal construction, so
// streams do not depend on the standard library's distribution classes.
//   uniform: top 53 bits of a draw scaled by 2^-53, in [0, 1)
//   normal:  Marsaglia polar method, second variate cached
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform();
    double normal();
    Vector normal_vector(Eigen::Index size);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64 finalizer applied to master + golden-ratio * (index + 1).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

inline constexpr double kDivergenceCap = 1e12;

struct TrajectoryState {
    Vector x;
    Vector u;
    long t = 0;
    Rng rng;

    [[nodiscard]] double cost(const LinearSystem& sys) const;
};

// x0 ~ N(0, Psi), u0 = -K x0 + v0.
TrajectoryState initial_state(const LinearSystem& sys, const Policy& k, std::uint64_t seed);
// Fixed x0, u0 = -K x0 + v0.
TrajectoryState initial_state(const LinearSystem& sys, const Policy& k, const Vector& x0, std::uint64_t seed);

// Redraws the current action for a new gain without moving the state.
void rebind_policy(const LinearSystem& sys, const Policy& k, TrajectoryState& state);

// x' = A x + B u + w, then u' = -K x' + v'. Draws w before v'.
void rollout_step(const LinearSystem& sys, const Policy& k, TrajectoryState& state);

// svec(z z^T) for z = (x, u).
Vector features(const Vector& x, const Vector& u);

struct SampleBatch {
    Matrix h_tilde;
    Vector b_tilde;
    long source_step = 0;
    long samples_consumed = 0;
};

// Single-pair estimate from z = (x, u) and the next pair's feature vector.
SampleBatch pair_estimate(const LinearSystem& sys, const Vector& x, const Vector& u, const Vector& next_features);

// Advances tau transitions and builds the estimate from the last two pairs.
SampleBatch markov_sample(const LinearSystem& sys, const Policy& k, TrajectoryState& state, long tau,
                          NextAction next = NextAction::Sampled);

struct MonteCarloBellman {
    BellmanSystem mean;
    Matrix h_stderr;
    Vector b_stderr;
    long samples = 0;
};

// Independent pairs with x drawn from the stationary law, one simulated transition each.
MonteCarloBellman stationary_bellman_mc(const LinearSystem& sys, const Policy& k, long samples, std::uint64_t seed,
                                        NextAction next = NextAction::Sampled);

struct BiasCurve {
    std::vector<long> taus;
    std::vector<double> h_bias; // ||mean H~ - H||
    std::vector<double> b_bias;
};

// Monte Carlo estimate of ||E[H~ | x0] - H|| for tau = 1..max_tau over `runs` fresh chains.
BiasCurve conditional_bias_curve(const LinearSystem& sys, const Policy& k, const Vector& x0, long max_tau, long runs,
                                 std::uint64_t seed, NextAction next = NextAction::Sampled);

} // namespace lqrac
