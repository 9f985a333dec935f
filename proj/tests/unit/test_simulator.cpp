#include "doctest.h"

#include "lqrac/error.hpp"
#include "lqrac/simulator.hpp"
#include "support/random_systems.hpp"

#include <cmath>

using namespace lqrac;

namespace {

LinearSystem scalar_system() {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    return LinearSystem(one, one, 100 * one, 100 * one, 0.01 * one, 0.01);
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("uniform and normal draws are reproducible") {
    Rng a(7), b(7);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
    }
    Rng c(8);
    for (int i = 0; i < 10000; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("trajectories are reproducible bit for bit") {
    const LinearSystem sys = scalar_system();
    const Policy k(sys, Matrix::Constant(1, 1, 0.5));
    TrajectoryState s1 = initial_state(sys, k, 99);
    TrajectoryState s2 = initial_state(sys, k, 99);
    for (int i = 0; i < 500; ++i) {
        rollout_step(sys, k, s1);
        rollout_step(sys, k, s2);
        REQUIRE(s1.x(0) == s2.x(0));
        REQUIRE(s1.u(0) == s2.u(0));
    }
    CHECK(s1.t == 500);
}

TEST_CASE("noiseless deadbeat loop stays at zero") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const LinearSystem sys(one, one, one, one, 1e-300 * one, 1e-300);
    const Policy k(sys, one);
    Vector x0(1);
    x0 << 3.0;
    TrajectoryState s = initial_state(sys, k, x0, 1);
    for (int i = 0; i < 5; ++i) {
        rollout_step(sys, k, s);
        CHECK(std::abs(s.x(0)) <= 1e-140);
    }
}

TEST_CASE("empirical state variance matches the stationary covariance") {
    const LinearSystem sys = scalar_system();
    const Policy k(sys, Matrix::Constant(1, 1, 0.5));
    const double sigma = policy_quantities(sys, k).sigma(0, 0);
    TrajectoryState s = initial_state(sys, k, 2024);
    for (int i = 0; i < 100; ++i) rollout_step(sys, k, s);
    // Batch means over a correlated chain for the standard error.
    const long batches = 1000, per = 1000;
    double sum = 0.0, sum2 = 0.0;
    for (long b = 0; b < batches; ++b) {
        double acc = 0.0;
        for (long i = 0; i < per; ++i) {
            rollout_step(sys, k, s);
            acc += s.x(0) * s.x(0);
        }
        acc /= per;
        sum += acc;
        sum2 += acc * acc;
    }
    const double mean = sum / batches;
    const double se = std::sqrt((sum2 / batches - mean * mean) / batches);
    CHECK(std::abs(mean - sigma) <= 3.0 * se);
}

TEST_CASE("features and pair estimates") {
    Vector x(1), u(1);
    x << 2.0;
    u << -1.0;
    const Vector f = features(x, u);
    REQUIRE(f.size() == 3);
    CHECK(f(0) == doctest::Approx(4.0));
    CHECK(f(1) == doctest::Approx(-2.0 * std::sqrt(2.0)));
    CHECK(f(2) == doctest::Approx(1.0));

    const LinearSystem sys = scalar_system();
    const SampleBatch b = pair_estimate(sys, x, u, Vector::Zero(3));
    CHECK(b.h_tilde(0, 0) == 1.0);
    CHECK(b.h_tilde.row(0).tail(3).isZero(0.0));
    CHECK(b.b_tilde(0) == doctest::Approx(100.0 * 4.0 + 100.0 * 1.0));
}

TEST_CASE("Markov samples consume tau transitions and keep the first row fixed") {
    const LinearSystem sys = scalar_system();
    const Policy k(sys, Matrix::Constant(1, 1, 0.5));
    TrajectoryState s = initial_state(sys, k, 5);
    for (long tau : {1L, 3L, 20L}) {
        const long before = s.t;
        const SampleBatch b = markov_sample(sys, k, s, tau);
        CHECK(b.samples_consumed == tau);
        CHECK(s.t - before == tau);
        CHECK(b.h_tilde(0, 0) == 1.0);
        CHECK(b.h_tilde.row(0).tail(3).isZero(0.0));
    }
}

TEST_CASE("Markov samples are unbiased in the long run") {
    const LinearSystem sys = scalar_system();
    const Policy k(sys, Matrix::Constant(1, 1, 0.5));
    const BellmanSystem exact = exact_bellman_system(sys, k);
    TrajectoryState s = initial_state(sys, k, 6);
    const long n = 1'000'000;
    Matrix sum = Matrix::Zero(4, 4), sum2 = Matrix::Zero(4, 4);
    for (long i = 0; i < n; ++i) {
        const SampleBatch b = markov_sample(sys, k, s, 20);
        sum += b.h_tilde;
        sum2 += b.h_tilde.cwiseProduct(b.h_tilde);
    }
    const Matrix mean = sum / n;
    const Matrix se = ((sum2 / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    for (Eigen::Index i = 1; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) {
            INFO("entry " << i << "," << j);
            CHECK(std::abs(mean(i, j) - exact.h(i, j)) <= 3.0 * se(i, j) + 1e-15);
        }
}

TEST_CASE("conditional bias decreases with tau") {
    const LinearSystem sys = scalar_system();
    const Policy k(sys, Matrix::Constant(1, 1, 0.5));
    Vector x0(1);
    x0 << 1.0;
    const BiasCurve c = conditional_bias_curve(sys, k, x0, 8, 200000, 77);
    REQUIRE(c.taus.size() == 8);
    CHECK(c.h_bias[0] > c.h_bias[3]);
    CHECK(c.h_bias[0] > 10.0 * c.h_bias[7]);
}

TEST_CASE("divergent loops raise NumericalOverflow") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    const LinearSystem sys(5.0 * one, one, one, one, one, 0.01);
    const Policy k(sys, Matrix::Zero(1, 1));
    Vector x0(1);
    x0 << 1.0;
    TrajectoryState s = initial_state(sys, k, x0, 3);
    bool thrown = false;
    try {
        for (int i = 0; i < 200; ++i) rollout_step(sys, k, s);
    } catch (const Error& e) {
        thrown = e.code() == ErrorCode::NumericalOverflow;
    }
    CHECK(thrown);
}

}
