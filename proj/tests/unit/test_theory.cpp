#include "doctest.h"

#include "lqrac/theory.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <string>

using namespace lqrac;

namespace {

LinearSystem scalar_system() {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    return LinearSystem(one, one, 100 * one, 100 * one, 0.01 * one, 0.01);
}

std::map<std::string, std::string> parse(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

} // namespace

TEST_SUITE("theory") {

TEST_CASE("scalar report values") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    ReportOptions ro;
    ro.empirical_samples = 0;
    const Policy k0(sys, Matrix::Constant(1, 1, 1.0));
    const ConstantsReport r = full_report(sys, k0, opt, 0.1 * (5.0 - opt.quantities.j), 0.1, ro);
    CHECK(r.j0 == doctest::Approx(5.0));
    CHECK(r.actor.c2 == doctest::Approx(0.01 * 100 * 100));
    CHECK(r.actor.c1 == doctest::Approx(2200.0));
    CHECK(r.omega_y == 1.0);
    CHECK(r.d_y <= std::sqrt(2.0) + 1e-15);
    CHECK(r.d_x == doctest::Approx(2.0 * r.d0));
    CHECK(r.h_norm <= r.bias.l_h);
    CHECK(r.solution_norm <= r.bias.r_star);
    // The sharpness bound is zero at K0 = 1, so the schedule entries are unbounded rather than NaN.
    CHECK(r.mu_lower == 0.0);
    CHECK(std::isinf(r.tau));
    CHECK(std::isinf(r.k_first));
}

TEST_CASE("report text is stable and ordered") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    ReportOptions ro;
    ro.empirical_samples = 1000;
    const Policy k0(sys, Matrix::Constant(1, 1, 0.5));
    const std::string a = full_report(sys, k0, opt, 1e-3, 0.1, ro).to_text();
    const std::string b = full_report(sys, k0, opt, 1e-3, 0.1, ro).to_text();
    CHECK(a == b);
    const auto kv = parse(a);
    CHECK(kv.at("actor.C2") == "100");
    CHECK(kv.count("complexity.samples.order_only") == 1);
    CHECK(a.find("input.J0=") < a.find("actor.C1="));
    CHECK(a.find("actor.C1=") < a.find("critic.H_norm="));
}

TEST_CASE("report grows with the initial cost") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    ReportOptions ro;
    ro.empirical_samples = 0;
    const auto lo = full_report(sys, Policy(sys, Matrix::Constant(1, 1, 0.9)), opt, 1e-3, 0.1, ro);
    const auto hi = full_report(sys, Policy(sys, Matrix::Constant(1, 1, 1.5)), opt, 1e-3, 0.1, ro);
    REQUIRE(hi.j0 > lo.j0);
    CHECK(hi.actor.c1 > lo.actor.c1);
    CHECK(hi.actor.c3 > lo.actor.c3);
    CHECK(hi.actor.rho_bar > lo.actor.rho_bar);
}

TEST_CASE("report input checks") {
    const LinearSystem sys = scalar_system();
    const Optimum opt = optimum(sys);
    const Policy k0(sys, Matrix::Constant(1, 1, 1.0));
    CHECK_THROWS((void)full_report(sys, k0, opt, 0.0, 0.1));
    CHECK_THROWS((void)full_report(sys, k0, opt, 0.1, 1.0));
}

}
