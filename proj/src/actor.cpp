#include "lqrac/actor.hpp"

#include "lqrac/error.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace lqrac {

Matrix extract_natural_gradient(const Vector& vartheta_hat, const Policy& k, Eigen::Index n, Eigen::Index kk) {
    const Eigen::Index m = n + kk;
    if (vartheta_hat.size() != 1 + SymVec::length_for(m)) {
        std::ostringstream os;
        os << "estimate has length " << vartheta_hat.size() << ", expected " << 1 + SymVec::length_for(m);
        fail(ErrorCode::DimensionMismatch, os.str());
    }
    if (k.k().rows() != kk || k.k().cols() != n) fail(ErrorCode::DimensionMismatch, "gain does not match dimensions");
    const Matrix theta = smat(SymVec(m, vartheta_hat.tail(SymVec::length_for(m))));
    return theta.bottomRightCorner(kk, kk) * k.k() - theta.bottomLeftCorner(kk, n);
}

Policy npg_step(const LinearSystem& sys, const Policy& k, const Matrix& e_hat, double eta) {
    if (!(eta > 0.0)) fail(ErrorCode::InvalidArgument, "step size must be positive");
    if (e_hat.rows() != k.k().rows() || e_hat.cols() != k.k().cols())
        fail(ErrorCode::DimensionMismatch, "gradient estimate does not match the gain");
    return Policy(sys, k.k() - 2.0 * eta * e_hat);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double schedule_h_norm(const LinearSystem& sys, const Policy& k, const CriticSettings& cs, double fixed) {
    switch (cs.h_norm_source) {
    case HNormSource::Exact: return op_norm(exact_bellman_system(sys, k, cs.next).h);
    case HNormSource::Bound: return bias_constants(sys, k, 0.0, 0.5).l_h;
    case HNormSource::Fixed: break;
    }
    return fixed;
}

} // namespace

TrainResult train(const LinearSystem& sys, const Policy& k0, const ActorConfig& config, std::uint64_t seed) {
    if (!k0.stable()) {
        std::ostringstream os;
        os << "initial gain has rho(A - BK) = " << k0.rho();
        fail(ErrorCode::UnstableInitialPolicy, os.str());
    }
    if (config.T < 0) fail(ErrorCode::InvalidArgument, "T must be non-negative");

    const Optimum opt = optimum(sys);
    const PolicyQuantities q0 = policy_quantities(sys, k0);
    const ActorConstants ac = actor_constants(sys, q0.j, opt.quantities.j, config.epsilon);
    const double eta = config.eta.value_or(ac.eta);
    if (!(eta > 0.0) || !std::isfinite(eta)) fail(ErrorCode::InvalidArgument, "step size must be positive");

    ActorTrace trace;
    trace.eta = eta;
    trace.l = ac.l;
    trace.l_clamped = ac.l_clamped;
    trace.rho_bar = ac.rho_bar;
    trace.jstar = opt.quantities.j;
    if (ac.l_clamped) trace.warnings.emplace_back("condition number below 1/2, l clamped to 1");

    const Eigen::Index n = sys.n();
    const Eigen::Index kk = sys.k();
    const bool critic = config.mode == GradientMode::Critic;
    TrajectoryState state = initial_state(sys, k0, derive_seed(seed, 0));
    Vector start = config.critic.initial_guess.size() == sys.unknown_dim() ? config.critic.initial_guess
                                                                            : Vector::Zero(sys.unknown_dim());
    Vector estimate = start;
    long samples = 0;
    const auto clock_start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    };

    const auto guard = [&](long t, const Policy& k, const PolicyQuantities& pq) {
        if (!config.guards_enabled) return;
        std::ostringstream os;
        if (k.rho() > ac.rho_bar * (1.0 + 1e-12))
            os << "t=" << t << ": rho " << k.rho() << " above bound " << ac.rho_bar << "; ";
        if (pq.j > 2.0 * q0.j * (1.0 + 1e-12)) os << "t=" << t << ": J " << pq.j << " above 2 J(K0); ";
        if (!critic) {
            const double curv = op_norm(sys.r() + sys.b().transpose() * pq.p * sys.b());
            if (eta > (1.0 + 1e-12) / curv) os << "t=" << t << ": step " << eta << " above 1/" << curv << "; ";
        }
        const std::string msg = os.str();
        if (msg.empty()) return;
        if (!critic) fail(ErrorCode::GuardViolation, msg);
        trace.warnings.push_back(msg);
        trace.flagged.push_back(t);
    };

    const auto censor_from = [&](long t, double rho) {
        for (long s = t; s <= config.T; ++s) {
            ActorRow row;
            row.t = s;
            row.j = kInf;
            row.err = kInf;
            row.e_norm = kNaN;
            row.delta_norm = kNaN;
            row.rho = rho;
            row.samples = samples;
            row.wall_seconds = elapsed();
            row.censored = true;
            trace.rows.push_back(row);
        }
        trace.diverged = true;
    };

    Policy k = k0;
    for (long t = 0; t < config.T; ++t) {
        const PolicyQuantities pq = policy_quantities(sys, k);
        guard(t, k, pq);
        const long samples_before = samples;

        Matrix e_hat;
        if (!critic) {
            e_hat = extract_natural_gradient(pq.vartheta, k, n, kk);
        } else {
            if (t > 0) {
                if (config.critic.restart_per_policy)
                    state = initial_state(sys, k, derive_seed(seed, static_cast<std::uint64_t>(t)));
                else
                    rebind_policy(sys, k, state);
            }
            EpochConfig ec = (t == 0 && config.critic.first_epochs) ? *config.critic.first_epochs : config.critic.epochs;
            ec.h_norm = schedule_h_norm(sys, k, config.critic, ec.h_norm);
            if (ec.mode == BudgetMode::Theory) {
                Eigen::JacobiSVD<Matrix> svd(exact_bellman_system(sys, k, config.critic.next).h);
                ec.theory.mu = svd.singularValues()(svd.singularValues().size() - 1);
            }
            MarkovOracle oracle(sys, k, state, ec.tau, config.critic.next);
            const Vector p0 = config.critic.warm_start ? estimate : start;
            try {
                const MultiEpochResult res = multi_epoch_run(oracle, p0, ec);
                estimate = res.p;
                samples += res.samples;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NumericalOverflow) throw;
                trace.failure = e.what();
                censor_from(t, k.rho());
                return {k, trace};
            }
            e_hat = extract_natural_gradient(estimate, k, n, kk);
        }

        ActorRow row;
        row.t = t;
        row.j = pq.j;
        row.err = pq.j - opt.quantities.j;
        row.e_norm = pq.e.norm();
        row.delta_norm = config.oracle_diagnostics ? (e_hat - pq.e).norm() : kNaN;
        row.rho = k.rho();
        row.samples = samples_before;
        row.wall_seconds = elapsed();
        trace.rows.push_back(row);

        Policy next = npg_step(sys, k, e_hat, eta);
        if (!next.stable()) {
            std::ostringstream os;
            os << "policy lost stability at t=" << t + 1 << " (rho " << next.rho() << ")";
            if (!critic && config.guards_enabled) fail(ErrorCode::GuardViolation, os.str());
            trace.failure = os.str();
            censor_from(t + 1, next.rho());
            return {next, trace};
        }
        k = std::move(next);
    }

    const PolicyQuantities pq = policy_quantities(sys, k);
    guard(config.T, k, pq);
    ActorRow row;
    row.t = config.T;
    row.j = pq.j;
    row.err = pq.j - opt.quantities.j;
    row.e_norm = pq.e.norm();
    row.delta_norm = kNaN;
    row.rho = k.rho();
    row.samples = samples;
    row.wall_seconds = elapsed();
    trace.rows.push_back(row);
    return {k, trace};
}

} // namespace lqrac
