#include "doctest.h"

#include "lqrac/error.hpp"
#include "lqrac/oracle.hpp"
#include "support/random_systems.hpp"

#include <cmath>
#include <initializer_list>

using namespace lqrac;
using lqrac::testing::Gen;

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
    Matrix m(r, c);
    auto it = v.begin();
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
    return m;
}

LinearSystem scalar_system() {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    return LinearSystem(one, one, 100 * one, 100 * one, 0.01 * one, 0.01);
}

// Reference values below come from scipy's discrete Lyapunov and Riccati
// solvers, computed outside this code base.
LinearSystem system21() {
    return LinearSystem(mat(2, 2, {1.0, 0.2, 0.0, 0.9}), mat(2, 1, {0.0, 1.0}), Matrix::Identity(2, 2),
                        mat(1, 1, {1.0}), 0.1 * Matrix::Identity(2, 2), 0.04);
}

LinearSystem system32() {
    return LinearSystem(mat(3, 3, {0.9, 0.1, 0.0, 0.0, 0.8, 0.2, 0.1, 0.0, 0.7}),
                        mat(3, 2, {1.0, 0.0, 0.0, 1.0, 0.5, 0.5}), mat(3, 3, {1, 0, 0, 0, 2, 0, 0, 0, 3}),
                        mat(2, 2, {2.0, 0.5, 0.5, 1.0}), mat(3, 3, {0.2, 0.05, 0.0, 0.05, 0.1, 0.0, 0.0, 0.0, 0.3}),
                        0.09);
}

void check_close(const Matrix& got, const Matrix& want, double tol) {
    INFO("got\n" << got << "\nwant\n" << want);
    CHECK((got - want).norm() <= tol * std::max(1.0, want.norm()));
}

} // namespace

TEST_SUITE("oracle") {

TEST_CASE("scalar system at K = 1 is one-step") {
    const LinearSystem sys = scalar_system();
    const auto q = policy_quantities(sys, Policy(sys, Matrix::Constant(1, 1, 1.0)));
    CHECK(q.sigma(0, 0) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(q.p(0, 0) == doctest::Approx(200.0).epsilon(1e-14));
    CHECK(q.j == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(q.e(0, 0) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("scalar system at K = 0.5") {
    const LinearSystem sys = scalar_system();
    for (auto backend : {LyapunovBackend::Direct, LyapunovBackend::FixedPoint}) {
        const auto q = policy_quantities(sys, Policy(sys, Matrix::Constant(1, 1, 0.5)), backend);
        CHECK(q.sigma(0, 0) == doctest::Approx(0.02 / 0.75).epsilon(1e-12));
        CHECK(q.p(0, 0) == doctest::Approx(125.0 / 0.75).epsilon(1e-12));
        CHECK(q.j == doctest::Approx(13.0 / 3.0).epsilon(1e-12));
        CHECK(q.e(0, 0) == doctest::Approx(-100.0 / 3.0).epsilon(1e-12));
        CHECK(q.grad(0, 0) == doctest::Approx(-16.0 / 9.0).epsilon(1e-12));
    }
}

TEST_CASE("natural gradient vanishes at the optimum") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    CHECK(opt.riccati.k(0, 0) == doctest::Approx(0.6180339887498949).epsilon(1e-12));
    CHECK(opt.quantities.j == doctest::Approx(4.23606797749979).epsilon(1e-12));
    CHECK(std::abs(opt.quantities.e(0, 0)) <= 1e-8);
}

TEST_CASE("two-state system matches reference values") {
    const LinearSystem sys = system21();
    const Optimum opt = optimum(sys);
    check_close(opt.riccati.p, mat(2, 2, {7.0412823663608313, 1.7288374996463192, 1.7288374996463192, 1.9888791001833319}), 1e-9);
    check_close(opt.riccati.k, mat(1, 2, {0.57842336263794536, 0.71456844472674041}), 1e-9);
    CHECK(opt.quantities.j == doctest::Approx(1.0225713106617493).epsilon(1e-10));

    const auto q = policy_quantities(sys, Policy(sys, mat(1, 2, {0.3, 0.5})));
    check_close(q.sigma, mat(2, 2, {0.70724337391004066, -0.28231028231028232, -0.28231028231028232, 0.32310282310282312}), 1e-11);
    check_close(q.p, mat(2, 2, {7.7272079772079767, 2.1566951566951569, 2.1566951566951569, 2.266856600189934}), 1e-11);
    CHECK(q.j == doctest::Approx(1.1300807217473887).epsilon(1e-12));
    check_close(q.e, mat(1, 2, {-1.1766381766381766, -0.83808167141500522}), 1e-11);
    check_close(q.grad, mat(1, 2, {-1.1911409613213979, 0.12278100359771744}), 1e-11);
}

TEST_CASE("three-state two-input system matches reference values") {
    const LinearSystem sys = system32();
    const Optimum opt = optimum(sys);
    check_close(opt.riccati.k,
                mat(2, 3, {0.38660315517004973, -0.11826337596650047, 0.18869630167787624, -0.046022284190249951,
                           0.51969706871460419, 0.30621276670866315}),
                1e-9);
    CHECK(opt.quantities.j == doctest::Approx(2.8005836284552976).epsilon(1e-10));

    const auto q = policy_quantities(sys, Policy(sys, mat(2, 3, {0.2, 0.1, 0.0, 0.0, 0.3, 0.1})));
    CHECK(q.j == doctest::Approx(3.2306490392606899).epsilon(1e-12));
    check_close(q.e,
                mat(2, 3, {-1.0933129741389755, 0.9849899353965732, -1.6105518131694239, 0.018376596621343222,
                           -0.75707496417771969, -1.4255177020708083}),
                1e-11);
    check_close(q.grad,
                mat(2, 3, {-1.2757396859382799, 0.095274756703653277, -1.845227186035703, -0.27978975489641167,
                           -0.6362142498091875, -1.7730550310917164}),
                1e-11);
}

TEST_CASE("Theta blocks reproduce the natural gradient") {
    Gen g(21);
    for (int i = 0; i < 30; ++i) {
        const auto d = lqrac::testing::random_system(g, 3, 2);
        const LinearSystem sys = d.system();
        const Optimum opt = optimum(sys);
        const Policy k(sys, lqrac::testing::random_stable_gain(g, sys, opt.riccati.k));
        const auto q = policy_quantities(sys, k);
        const Matrix e = q.theta.bottomRightCorner(2, 2) * k.k() - q.theta.bottomLeftCorner(2, 3);
        CHECK((e - q.e).norm() <= 1e-10 * std::max(1.0, q.e.norm()));
        CHECK(q.vartheta(0) == q.j);
    }
}

TEST_CASE("gradient matches central differences") {
    Gen g(22);
    for (int i = 0; i < 20; ++i) {
        const auto d = lqrac::testing::random_system(g, 2, 1);
        const LinearSystem sys = d.system();
        const Optimum opt = optimum(sys);
        const Matrix k = lqrac::testing::random_stable_gain(g, sys, opt.riccati.k, 0.3, 0.9);
        const auto q = policy_quantities(sys, Policy(sys, k));
        Matrix fd(k.rows(), k.cols());
        const double h = 1e-6;
        for (Eigen::Index r = 0; r < k.rows(); ++r)
            for (Eigen::Index c = 0; c < k.cols(); ++c) {
                Matrix kp = k, km = k;
                kp(r, c) += h;
                km(r, c) -= h;
                fd(r, c) = (policy_quantities(sys, Policy(sys, kp)).j - policy_quantities(sys, Policy(sys, km)).j) /
                           (2 * h);
            }
        CHECK((fd - q.grad).norm() <= 1e-3 * std::max(1e-8, q.grad.norm()) + 1e-7);
    }
}

TEST_CASE("cost identity") {
    const LinearSystem sys = scalar_system();
    CHECK(cost_identity_gap(sys, Policy(sys, Matrix::Constant(1, 1, 0.5))) <= 1e-10);
    const Optimum opt = optimum(sys);
    CHECK(cost_identity_gap(sys, Policy(sys, opt.riccati.k)) <= 1e-8);

    Gen g(23);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto d = lqrac::testing::random_system(g, 3, 2);
        const LinearSystem s = d.system();
        const Policy k(s, lqrac::testing::random_stable_gain(g, s, optimum(s).riccati.k));
        worst = std::max(worst, cost_identity_gap(s, k));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("performance difference") {
    const LinearSystem sys = scalar_system();
    const Policy k1(sys, Matrix::Constant(1, 1, 1.0));
    const auto same = performance_difference(sys, k1, k1);
    CHECK(std::abs(same.lhs) <= 1e-12);
    CHECK(std::abs(same.rhs) <= 1e-12);

    const auto pd = performance_difference(sys, k1, Policy(sys, Matrix::Constant(1, 1, 0.5)));
    CHECK(pd.lhs == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(pd.lhs - pd.rhs) <= 1e-8);

    Gen g(24);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto d = lqrac::testing::random_system(g, 3, 2);
        const LinearSystem s = d.system();
        const Matrix ks = optimum(s).riccati.k;
        const auto r = performance_difference(s, Policy(s, lqrac::testing::random_stable_gain(g, s, ks)),
                                              Policy(s, lqrac::testing::random_stable_gain(g, s, ks)));
        worst = std::max(worst, std::abs(r.lhs - r.rhs));
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("gradient-domination sandwich") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    const auto at_opt = pl_sandwich(sys, Policy(sys, opt.riccati.k), opt);
    CHECK(std::abs(at_opt.lower) <= 1e-8);
    CHECK(std::abs(at_opt.mid) <= 1e-8);
    CHECK(std::abs(at_opt.upper) <= 1e-8);

    const auto s1 = pl_sandwich(sys, Policy(sys, Matrix::Constant(1, 1, 1.0)), opt);
    CHECK(s1.mid == doctest::Approx(5.0 - 4.23606797749979).epsilon(1e-10));
    CHECK(s1.lower <= s1.mid);
    CHECK(s1.mid <= s1.upper);

    Gen g(25);
    for (int i = 0; i < 100; ++i) {
        const double kv = g.uniform(0.0, 1.99);
        const auto s = pl_sandwich(sys, Policy(sys, Matrix::Constant(1, 1, kv)), opt);
        CHECK(s.lower <= s.mid * (1 + 1e-12) + 1e-12);
        CHECK(s.mid <= s.upper * (1 + 1e-12) + 1e-12);
    }
}

TEST_CASE("variational monotonicity is non-negative") {
    Gen g(26);
    for (int i = 0; i < 50; ++i) {
        const auto d = lqrac::testing::random_system(g, 3, 2);
        const LinearSystem s = d.system();
        const Optimum opt = optimum(s);
        const auto vi = vi_monotonicity(s, Policy(s, lqrac::testing::random_stable_gain(g, s, opt.riccati.k)), opt);
        CHECK(vi.inner >= -1e-9);
        CHECK(vi.gap >= -1e-9);
    }
}

TEST_CASE("actor constants for the scalar system") {
    const LinearSystem sys = scalar_system();
    const auto c = actor_constants(sys, 5.0, 4.23606797749979, 1e-3);
    CHECK(c.c1 == doctest::Approx(2200.0));
    CHECK(c.c2 == doctest::Approx(100.0));
    CHECK(c.c3 == doctest::Approx(0.05));
    CHECK(c.eta == doctest::Approx(1.0 / 4400.0));
    CHECK(c.rho_bar == doctest::Approx(std::sqrt(0.8)).epsilon(1e-14));

    const auto hi = actor_constants(sys, 8.0, 4.23606797749979, 1e-3);
    CHECK(hi.c1 > c.c1);
    CHECK(hi.c3 > c.c3);
    CHECK(hi.rho_bar > c.rho_bar);
}

TEST_CASE("trace bounds hold at random stable gains") {
    Gen g(27);
    for (int i = 0; i < 30; ++i) {
        const auto d = lqrac::testing::random_system(g, 3, 2);
        const LinearSystem s = d.system();
        const Optimum opt = optimum(s);
        const Policy k(s, lqrac::testing::random_stable_gain(g, s, opt.riccati.k));
        CHECK(trace_bounds(s, policy_quantities(s, k)).hold());
    }
}

TEST_CASE("constructors validate their inputs") {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    CHECK_THROWS_AS(LinearSystem(one, one, one, one, one, 0.0), Error);
    CHECK_THROWS_AS(LinearSystem(one, one, -one, one, one, 0.01), Error);
    CHECK_THROWS_AS(LinearSystem(Matrix::Identity(2, 2), one, one, one, one, 0.01), Error);
    const LinearSystem sys = scalar_system();
    try {
        (void)policy_quantities(sys, Policy(sys, Matrix::Constant(1, 1, 3.0)));
        FAIL("expected UnstablePolicy");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnstablePolicy);
    }
}

}
