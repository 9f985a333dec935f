#include "lqrac/theory.hpp"

#include "lqrac/critic.hpp"
#include "lqrac/error.hpp"
#include "lqrac/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace lqrac {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string ConstantsReport::to_text() const {
    std::ostringstream os;
    const auto put = [&os](const char* key, double v) { os << key << '=' << fmt(v) << '\n'; };
    const auto put_i = [&os](const char* key, long v) { os << key << '=' << v << '\n'; };
    os << "# key=value; order_only entries carry an unspecified absolute factor set to 1\n";
    put("input.J0", j0);
    put("input.Jstar", jstar);
    put("input.epsilon", epsilon);
    put("input.delta_star", delta_star);
    put("actor.C1", actor.c1);
    put("actor.C2", actor.c2);
    put("actor.C3", actor.c3);
    put("actor.C4", actor.c4);
    put("actor.C5", actor.c5);
    put("actor.C6", actor.c6);
    put("actor.eta", actor.eta);
    put("actor.kappa", actor.kappa);
    put_i("actor.l", actor.l);
    put_i("actor.l_clamped", actor.l_clamped ? 1 : 0);
    put("actor.rho_bar", actor.rho_bar);
    put_i("actor.N_out", n_out);
    put("critic.H_norm", h_norm);
    put("critic.M_H", bias.m_h);
    put("critic.M_b", bias.m_b);
    put("critic.L_H", bias.l_h);
    put("critic.b_bound", bias.b_bound);
    put("critic.R_star", bias.r_star);
    put("critic.C", bias.c);
    put("critic.O_H", bias.o_h);
    put("critic.O_b", bias.o_b);
    put("critic.mixing_gamma", bias.mixing_gamma);
    put("critic.mixing_rho", bias.mixing_rho);
    put("critic.mixing_prefactor", bias.mixing_prefactor);
    put("critic.mu_lower", mu_lower);
    put("critic.mu_exact", mu_exact);
    put("critic.solution_norm", solution_norm);
    put("critic.Omega_X", omega_x);
    put("critic.Omega_Y", omega_y);
    put("critic.D0", d0);
    put("critic.D_X", d_x);
    put("critic.D_Y", d_y);
    put("critic.M_X", m_x);
    put("critic.M_Y", m_y);
    put("critic.sigma_X", sigma_x);
    put("critic.sigma_Y", sigma_y);
    put("critic.sigma_X_empirical", sigma_x_empirical);
    put("critic.sigma_Y_empirical", sigma_y_empirical);
    put("critic.O_X", o_x);
    put("critic.O_Y", o_y);
    put("schedule.epsilon", critic_epsilon);
    put("schedule.delta", delta);
    put("schedule.tau", tau);
    put_i("schedule.S", epochs);
    put("schedule.k_first", k_first);
    put("schedule.k_last", k_last);
    put("schedule.k_total", k_total);
    put("schedule.N_S.order_only", n_s);
    put("complexity.N_in.order_only", n_in);
    put("complexity.samples.order_only", sample_bound);
    return os.str();
}

ConstantsReport full_report(const LinearSystem& sys, const Policy& k0, const Optimum& opt, double epsilon,
                            double delta_star, const ReportOptions& options) {
    if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (!(delta_star > 0.0 && delta_star < 1.0)) fail(ErrorCode::InvalidArgument, "delta_star must lie in (0, 1)");
    const PolicyQuantities pq = policy_quantities(sys, k0);

    ConstantsReport r;
    r.j0 = pq.j;
    r.jstar = opt.quantities.j;
    r.epsilon = epsilon;
    r.delta_star = delta_star;
    r.actor = actor_constants(sys, r.j0, r.jstar, epsilon);
    r.n_out = static_cast<long>(std::ceil(r.actor.kappa)) *
              static_cast<long>(std::max(0.0, std::ceil(std::log2(r.j0 / epsilon))));

    const BellmanSystem exact = exact_bellman_system(sys, k0);
    Eigen::JacobiSVD<Matrix> svd(exact.h);
    r.h_norm = svd.singularValues()(0);
    r.mu_exact = svd.singularValues()(svd.singularValues().size() - 1);
    r.mu_lower = sharpness_lower_bound(sys, k0);
    r.solution_norm = pq.vartheta.norm();

    r.critic_epsilon = std::min({r.actor.c4, r.actor.c5, r.actor.c6});
    r.bias = bias_constants(sys, k0, options.x0_norm, 0.5);

    r.omega_y = 1.0;
    r.d0 = r.bias.r_star;
    r.d_x = 2.0 * r.d0;
    r.d_y = std::sqrt(2.0);
    r.omega_x = r.solution_norm + 2.0 * std::sqrt(2.0) * r.d_x; // sup of theta_t is 1
    r.o_x = r.bias.o_h * r.omega_y;
    r.o_y = r.bias.o_h * r.omega_x + r.bias.o_b;

    const double eps = r.critic_epsilon;
    const double mu = r.mu_lower;
    r.delta = eps / 200.0 *
              std::min(mu * mu / (r.d0 * r.d0 * r.o_x * r.o_x + r.d_y * r.d_y * r.o_y * r.o_y),
                       1.0 / (r.d0 * r.o_x * r.o_x + r.d_y * r.o_y * r.o_y));
    r.bias.delta = std::clamp(r.delta, 1e-300, 0.5);
    const double log_term = std::log(std::exp(1.0) / r.bias.delta);
    r.m_x = r.bias.m_h * r.omega_y * log_term;
    r.m_y = (r.bias.m_h * r.omega_x + r.bias.m_b) * log_term;
    r.sigma_x = 2.0 * r.m_x;
    r.sigma_y = 2.0 * r.m_y;

    if (!(mu > 0.0)) {
        r.tau = std::numeric_limits<double>::infinity();
    } else if (r.bias.rho == 0.0) {
        r.tau = 1.0;
    } else {
        r.tau = std::max(1.0, std::log(10.0 * r.bias.c * (r.d0 * r.m_x + r.d_y * r.m_y) *
                                       std::max(1.0 / (mu * eps), 1.0 / std::sqrt(eps))) /
                                  std::log(1.0 / r.bias.rho));
    }
    r.epochs = std::max(1L, static_cast<long>(std::ceil(std::log2(2.0 * r.d0 * r.d0 / eps))));
    if (mu > 0.0) {
        for (long s = 1; s <= r.epochs; ++s) {
            const double ks =
                theory_epoch_iterations(s, r.h_norm, mu, r.d_y, r.d0, r.sigma_x, r.sigma_y, r.bias.delta);
            if (s == 1) r.k_first = ks;
            r.k_last = ks;
            r.k_total += ks;
        }
    } else {
        r.k_first = r.k_last = r.k_total = std::numeric_limits<double>::infinity();
    }
    r.n_s = std::max(r.h_norm * r.d_y / mu * std::log(r.d0 * r.d0 / eps),
                     log_term / (mu * mu) *
                         std::max(r.sigma_x * r.sigma_x * std::log(r.d0 / eps), r.d_y * r.d_y * r.sigma_y * r.sigma_y / eps));

    const double rho_t = r.actor.rho_bar;
    const double one_minus = 1.0 - rho_t * rho_t;
    r.n_in = std::pow(r.j0, 9) / (epsilon * one_minus * one_minus) * std::pow(std::log(1.0 / (epsilon * delta_star)), 3.5) *
             std::log(1.0 / epsilon);
    r.sample_bound = std::pow(r.j0, 9) / (epsilon * std::pow(one_minus, 3)) *
                     std::pow(std::log(1.0 / (epsilon * delta_star)), 3.5) * std::pow(std::log(1.0 / epsilon), 2);

    if (options.empirical_samples > 1) {
        // Root-mean-square size of the primal and dual gradient noise.
        const Matrix chol = pq.sigma.llt().matrixL();
        TrajectoryState s;
        s.rng = Rng(options.seed);
        double acc_x = 0.0, acc_y = 0.0;
        for (long i = 0; i < options.empirical_samples; ++i) {
            s.x = chol * s.rng.normal_vector(sys.n());
            s.u = -k0.k() * s.x + std::sqrt(sys.sigma2()) * s.rng.normal_vector(sys.k());
            const Vector x = s.x;
            const Vector u = s.u;
            rollout_step(sys, k0, s);
            const SampleBatch batch = pair_estimate(sys, x, u, features(s.x, s.u));
            const double dh = op_norm(batch.h_tilde - exact.h);
            const double dy = ((batch.h_tilde - exact.h) * pq.vartheta - (batch.b_tilde - exact.b)).norm();
            acc_x += dh * dh;
            acc_y += dy * dy;
        }
        const auto nn = static_cast<double>(options.empirical_samples);
        r.sigma_x_empirical = std::sqrt(acc_x / nn);
        r.sigma_y_empirical = std::sqrt(acc_y / nn);
    }
    return r;
}

} // namespace lqrac
