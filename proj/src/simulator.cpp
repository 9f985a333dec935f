#include "lqrac/simulator.hpp"

#include "lqrac/error.hpp"

#include <cmath>
#include <sstream>

namespace lqrac {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double a, b, s;
    do {
        a = 2.0 * uniform() - 1.0;
        b = 2.0 * uniform() - 1.0;
        s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * f;
    has_spare_ = true;
    return a * f;
}

Vector Rng::normal_vector(Eigen::Index size) {
    Vector out(size);
    for (Eigen::Index i = 0; i < size; ++i) out(i) = normal();
    return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double TrajectoryState::cost(const LinearSystem& sys) const {
    return x.dot(sys.q() * x) + u.dot(sys.r() * u);
}

TrajectoryState initial_state(const LinearSystem& sys, const Policy& k, std::uint64_t seed) {
    TrajectoryState s;
    s.rng = Rng(seed);
    s.x = sys.psi_chol() * s.rng.normal_vector(sys.n());
    s.u = -k.k() * s.x + std::sqrt(sys.sigma2()) * s.rng.normal_vector(sys.k());
    return s;
}

TrajectoryState initial_state(const LinearSystem& sys, const Policy& k, const Vector& x0, std::uint64_t seed) {
    if (x0.size() != sys.n()) fail(ErrorCode::DimensionMismatch, "initial state has wrong size");
    TrajectoryState s;
    s.rng = Rng(seed);
    s.x = x0;
    s.u = -k.k() * s.x + std::sqrt(sys.sigma2()) * s.rng.normal_vector(sys.k());
    return s;
}

void rebind_policy(const LinearSystem& sys, const Policy& k, TrajectoryState& state) {
    state.u = -k.k() * state.x + std::sqrt(sys.sigma2()) * state.rng.normal_vector(sys.k());
}

void rollout_step(const LinearSystem& sys, const Policy& k, TrajectoryState& state) {
    const Vector w = sys.psi_chol() * state.rng.normal_vector(sys.n());
    Vector next = sys.a() * state.x + sys.b() * state.u + w;
    const double nrm = next.norm();
    if (!(nrm <= kDivergenceCap)) {
        std::ostringstream os;
        os << "state norm " << nrm << " exceeded " << kDivergenceCap << " at step " << state.t + 1;
        fail(ErrorCode::NumericalOverflow, os.str());
    }
    state.x = std::move(next);
    state.u = -k.k() * state.x + std::sqrt(sys.sigma2()) * state.rng.normal_vector(sys.k());
    ++state.t;
}

Vector features(const Vector& x, const Vector& u) {
    const Eigen::Index m = x.size() + u.size();
    Vector z(m);
    z << x, u;
    Vector out(SymVec::length_for(m));
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        out(pos++) = z(i) * z(i);
        for (Eigen::Index j = i + 1; j < m; ++j) out(pos++) = std::sqrt(2.0) * z(i) * z(j);
    }
    return out;
}

SampleBatch pair_estimate(const LinearSystem& sys, const Vector& x, const Vector& u, const Vector& next_features) {
    const Vector phi = features(x, u);
    const Eigen::Index d = phi.size();
    const double c = x.dot(sys.q() * x) + u.dot(sys.r() * u);
    SampleBatch out;
    out.h_tilde = Matrix::Zero(d + 1, d + 1);
    out.h_tilde(0, 0) = 1.0;
    out.h_tilde.block(1, 0, d, 1) = phi;
    out.h_tilde.block(1, 1, d, d) = phi * (phi - next_features).transpose();
    out.b_tilde.resize(d + 1);
    out.b_tilde(0) = c;
    out.b_tilde.tail(d) = c * phi;
    return out;
}

namespace {

Vector next_features(const Policy& k, const TrajectoryState& s, NextAction next) {
    if (next == NextAction::Greedy) return features(s.x, -k.k() * s.x);
    return features(s.x, s.u);
}

} // namespace

SampleBatch markov_sample(const LinearSystem& sys, const Policy& k, TrajectoryState& state, long tau,
                          NextAction next) {
    if (tau < 1) fail(ErrorCode::InvalidArgument, "tau must be at least 1");
    for (long i = 0; i < tau - 1; ++i) rollout_step(sys, k, state);
    const Vector x = state.x;
    const Vector u = state.u;
    rollout_step(sys, k, state);
    SampleBatch out = pair_estimate(sys, x, u, next_features(k, state, next));
    out.source_step = state.t - 1;
    out.samples_consumed = tau;
    return out;
}

MonteCarloBellman stationary_bellman_mc(const LinearSystem& sys, const Policy& k, long samples, std::uint64_t seed,
                                        NextAction next) {
    if (samples < 2) fail(ErrorCode::InvalidArgument, "Monte Carlo needs at least two samples");
    const PolicyQuantities pq = policy_quantities(sys, k);
    const Matrix chol = pq.sigma.llt().matrixL();
    const Eigen::Index dim = sys.unknown_dim();
    Matrix h_sum = Matrix::Zero(dim, dim), h_sq = Matrix::Zero(dim, dim);
    Vector b_sum = Vector::Zero(dim), b_sq = Vector::Zero(dim);

    TrajectoryState s;
    s.rng = Rng(seed);
    for (long i = 0; i < samples; ++i) {
        s.x = chol * s.rng.normal_vector(sys.n());
        s.u = -k.k() * s.x + std::sqrt(sys.sigma2()) * s.rng.normal_vector(sys.k());
        const Vector x = s.x;
        const Vector u = s.u;
        rollout_step(sys, k, s);
        const SampleBatch batch = pair_estimate(sys, x, u, next_features(k, s, next));
        h_sum += batch.h_tilde;
        h_sq += batch.h_tilde.cwiseAbs2();
        b_sum += batch.b_tilde;
        b_sq += batch.b_tilde.cwiseAbs2();
    }
    const auto nn = static_cast<double>(samples);
    MonteCarloBellman out;
    out.samples = samples;
    out.mean.exact = false;
    out.mean.h = h_sum / nn;
    out.mean.b = b_sum / nn;
    const Matrix h_var = ((h_sq / nn - out.mean.h.cwiseAbs2()) * (nn / (nn - 1.0))).cwiseMax(0.0);
    const Vector b_var = ((b_sq / nn - out.mean.b.cwiseAbs2()) * (nn / (nn - 1.0))).cwiseMax(0.0);
    out.h_stderr = (h_var / nn).cwiseSqrt();
    out.b_stderr = (b_var / nn).cwiseSqrt();
    return out;
}

BiasCurve conditional_bias_curve(const LinearSystem& sys, const Policy& k, const Vector& x0, long max_tau, long runs,
                                 std::uint64_t seed, NextAction next) {
    if (max_tau < 1 || runs < 1) fail(ErrorCode::InvalidArgument, "bias curve needs max_tau >= 1 and runs >= 1");
    const BellmanSystem exact = exact_bellman_system(sys, k, next);
    const Eigen::Index dim = sys.unknown_dim();
    std::vector<Matrix> h_sum(static_cast<std::size_t>(max_tau), Matrix::Zero(dim, dim));
    std::vector<Vector> b_sum(static_cast<std::size_t>(max_tau), Vector::Zero(dim));
    for (long r = 0; r < runs; ++r) {
        TrajectoryState s = initial_state(sys, k, x0, derive_seed(seed, static_cast<std::uint64_t>(r)));
        for (long tau = 1; tau <= max_tau; ++tau) {
            const Vector x = s.x;
            const Vector u = s.u;
            rollout_step(sys, k, s);
            const SampleBatch batch = pair_estimate(sys, x, u, next_features(k, s, next));
            h_sum[static_cast<std::size_t>(tau - 1)] += batch.h_tilde;
            b_sum[static_cast<std::size_t>(tau - 1)] += batch.b_tilde;
        }
    }
    BiasCurve out;
    const auto nn = static_cast<double>(runs);
    for (long tau = 1; tau <= max_tau; ++tau) {
        out.taus.push_back(tau);
        out.h_bias.push_back(op_norm(h_sum[static_cast<std::size_t>(tau - 1)] / nn - exact.h));
        out.b_bias.push_back((b_sum[static_cast<std::size_t>(tau - 1)] / nn - exact.b).norm());
    }
    return out;
}

} // namespace lqrac
