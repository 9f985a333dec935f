#include "lqrac/critic.hpp"

#include "lqrac/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqrac {

SampleBatch ExactOracle::draw() {
    SampleBatch out;
    out.h_tilde = system_.h;
    out.b_tilde = system_.b;
    return out;
}

MarkovOracle::MarkovOracle(const LinearSystem& sys, Policy k, TrajectoryState& state, long tau, NextAction next)
    : sys_(sys), k_(std::move(k)), state_(state), tau_(tau), next_(next) {
    if (tau_ < 1) fail(ErrorCode::InvalidArgument, "tau must be at least 1");
}

SampleBatch MarkovOracle::draw() { return markov_sample(sys_, k_, state_, tau_, next_); }

double SaddleProblem::dual_diameter() const noexcept { return std::sqrt(2.0) * dual_radius; }

Vector SaddleProblem::project_primal(const Vector& x) const {
    // {1/2 ||x - c||^2 <= D^2} is the Euclidean ball of radius sqrt(2) D.
    const double r = std::sqrt(2.0) * radius;
    const Vector d = x - center;
    const double nrm = d.norm();
    if (nrm <= r) return x;
    return center + d * (r / nrm);
}

Vector SaddleProblem::project_dual(const Vector& y) const {
    const double nrm = y.norm();
    if (nrm <= dual_radius) return y;
    return y * (dual_radius / nrm);
}

double Schedule::eta(long t) const {
    const auto tt = static_cast<double>(t);
    return 3.0 * h_norm * d_y / (2.0 * d_x) + 3.0 * sigma_x * std::sqrt(tt) / (2.0 * std::sqrt(2.0) * d_x);
}

double Schedule::lambda(long t) const {
    const auto tt = static_cast<double>(t);
    return 3.0 * h_norm * d_x / (2.0 * d_y) + 3.0 * sigma_y * std::sqrt(tt) / (2.0 * std::sqrt(2.0) * d_y);
}

double Schedule::theta(long t) const { return t <= 0 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(t); }

double Schedule::gamma(long t) const { return static_cast<double>(t); }

void Schedule::validate() const {
    const auto bad = [](const std::string& what, long t) {
        std::ostringstream os;
        os << what << " violated at t = " << t;
        fail(ErrorCode::InvalidSchedule, os.str());
    };
    if (k < 0) bad("non-negative iteration budget", 0);
    if (!(d_x > 0.0) || !(d_y > 0.0)) bad("positive set diameters", 0);
    if (!(h_norm >= 0.0) || !(sigma_x >= 0.0) || !(sigma_y >= 0.0)) bad("non-negative schedule constants", 0);
    if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) bad("p, q in (0, 1)", 0);
    constexpr double slack = 1e-12;
    for (long t = 1; t <= k; ++t) {
        const double e = eta(t);
        const double l = lambda(t);
        if (!(e > 0.0) || !(l > 0.0) || !std::isfinite(e) || !std::isfinite(l)) bad("positive finite step sizes", t);
        if (t > 1) {
            if (gamma(t - 1) * eta(t - 1) > gamma(t) * e * (1.0 + slack)) bad("gamma_{t-1} eta_{t-1} <= gamma_t eta_t", t);
            if (gamma(t - 1) * lambda(t - 1) > gamma(t) * l * (1.0 + slack))
                bad("gamma_{t-1} lambda_{t-1} <= gamma_t lambda_t", t);
        }
        if (std::abs(gamma(t) * theta(t) - gamma(t - 1)) > slack * gamma(t)) bad("gamma_t theta_t = gamma_{t-1}", t);
        const double lhs = h_norm * h_norm / (p * l);
        if (lhs - q * e > slack * std::max(lhs, q * e)) bad("||H||^2 / (p lambda_t) <= q eta_t", t);
    }
}

Schedule default_schedule(const SaddleProblem& prob, long k, double sigma_x, double sigma_y) {
    Schedule s;
    s.k = k;
    s.h_norm = prob.h_norm;
    s.d_x = prob.primal_diameter();
    s.d_y = prob.dual_diameter();
    s.sigma_x = sigma_x;
    s.sigma_y = sigma_y;
    s.validate();
    return s;
}

CspdResult cspd_run(const SaddleProblem& prob, const Schedule& schedule, const Vector& x_init, const Vector& y_init,
                    const BellmanSystem* diagnostics, const TraceSink& sink) {
    if (prob.oracle == nullptr) fail(ErrorCode::InvalidArgument, "saddle problem has no sample source");
    const Eigen::Index dim = prob.dim();
    if (x_init.size() != dim || y_init.size() != dim) fail(ErrorCode::DimensionMismatch, "initial point has wrong size");
    if ((x_init - prob.center).squaredNorm() * 0.5 > prob.radius * prob.radius * (1.0 + 1e-12))
        fail(ErrorCode::InvalidArgument, "initial primal point lies outside the primal ball");
    if (y_init.norm() > prob.dual_radius * (1.0 + 1e-12))
        fail(ErrorCode::InvalidArgument, "initial dual point lies outside the dual ball");

    PDState st;
    st.x_prev = x_init;
    st.x_curr = x_init;
    st.y_curr = y_init;
    st.z = x_init;
    st.x_bar = x_init;
    st.y_bar = y_init;

    for (long t = 1; t <= schedule.k; ++t) {
        // x_prev holds x_{t-2}, x_curr holds x_{t-1}.
        st.z = st.x_curr + schedule.theta(t) * (st.x_curr - st.x_prev);

        const SampleBatch dual_batch = prob.oracle->draw();
        st.samples_used += dual_batch.samples_consumed;
        const double lam = schedule.lambda(t);
        st.y_curr = prob.project_dual(st.y_curr + (dual_batch.h_tilde * st.z - dual_batch.b_tilde) / lam);

        const SampleBatch primal_batch = prob.oracle->draw();
        st.samples_used += primal_batch.samples_consumed;
        const double eta = schedule.eta(t);
        Vector x_next = prob.project_primal(st.x_curr - primal_batch.h_tilde.transpose() * st.y_curr / eta);
        st.x_prev = std::move(st.x_curr);
        st.x_curr = std::move(x_next);
        st.t = t;

        // Running form of 2 / (k (k + 1)) sum_t t x_t.
        const double w = 2.0 / static_cast<double>(t + 1);
        if (t == 1) {
            st.x_bar = st.x_curr;
            st.y_bar = st.y_curr;
        } else {
            st.x_bar += w * (st.x_curr - st.x_bar);
            st.y_bar += w * (st.y_curr - st.y_bar);
        }
        if (!st.x_curr.allFinite()) fail(ErrorCode::NumericalOverflow, "primal iterate became non-finite");

        if (sink) {
            TraceRow row;
            row.t = t;
            row.eta = eta;
            row.lambda = lam;
            row.samples = st.samples_used;
            if (diagnostics != nullptr) row.gap = gap(*diagnostics, st.x_bar);
            sink(row);
        }
    }
    CspdResult out;
    out.x_bar = st.x_bar;
    out.y_bar = st.y_bar;
    out.state = std::move(st);
    return out;
}

double gap(const BellmanSystem& system, const Vector& x) { return bellman_residual(system, x); }

double theory_epoch_iterations(long s, double h_norm, double mu, double d_y, double d0, double sigma_x, double sigma_y,
                               double delta) {
    if (!(mu > 0.0) || !(d0 > 0.0) || !(delta > 0.0 && delta < 1.0) || s < 1)
        fail(ErrorCode::InvalidArgument, "theory budget needs mu > 0, D0 > 0, delta in (0, 1), s >= 1");
    const double det = h_norm * d_y / mu;
    const double sto = (225.0 + std::log(1.0 / delta)) / (mu * mu) *
                       (sigma_x * sigma_x + d_y * d_y * sigma_y * sigma_y / (4.0 * d0 * d0) *
                                                std::pow(2.0, static_cast<double>(s - 1)));
    return 5000.0 * std::max(det, sto);
}

MultiEpochResult multi_epoch_run(SampleOracle& oracle, const Vector& p0, const EpochConfig& config,
                                 const BellmanSystem* diagnostics, const Vector* truth, const TraceSink& sink) {
    if (config.epochs < 1) fail(ErrorCode::InvalidArgument, "at least one epoch is required");
    if (!(config.d0 > 0.0)) fail(ErrorCode::InvalidArgument, "initial radius must be positive");
    if (config.mode == BudgetMode::Practical && config.iterations.empty())
        fail(ErrorCode::InvalidArgument, "practical mode needs an iteration list");
    const long per_iter = oracle.exact() ? 0 : 2 * config.tau;

    MultiEpochResult out;
    out.p = p0;
    for (long s = 1; s <= config.epochs; ++s) {
        SaddleProblem prob;
        prob.oracle = &oracle;
        prob.center = out.p;
        prob.radius = config.d0 * std::pow(2.0, -0.5 * static_cast<double>(s - 1));
        prob.h_norm = config.h_norm;

        long k = 0;
        if (config.mode == BudgetMode::Practical) {
            const auto idx = static_cast<std::size_t>(std::min<long>(s, static_cast<long>(config.iterations.size())) - 1);
            k = config.iterations[idx];
        } else {
            const double want = std::ceil(theory_epoch_iterations(s, config.h_norm, config.theory.mu,
                                                                  prob.dual_diameter(), config.d0, config.sigma_x,
                                                                  config.sigma_y, config.theory.delta));
            if (!(want < 1e15)) {
                std::ostringstream os;
                os << "theory budget for epoch " << s << " is " << want << " iterations";
                fail(ErrorCode::EpochBudgetExceeded, os.str());
            }
            k = static_cast<long>(want);
        }
        if (k < 0) fail(ErrorCode::InvalidArgument, "iteration counts must be non-negative");
        if (config.max_samples > 0 && out.samples + per_iter * k > config.max_samples) {
            std::ostringstream os;
            os << "epoch " << s << " needs " << per_iter * k << " samples, cap leaves "
               << config.max_samples - out.samples;
            fail(ErrorCode::EpochBudgetExceeded, os.str());
        }

        const Schedule schedule = default_schedule(prob, k, config.sigma_x, config.sigma_y);
        const CspdResult res = cspd_run(prob, schedule, out.p, Vector::Zero(out.p.size()), diagnostics, sink);
        out.p = res.x_bar;
        out.samples += res.state.samples_used;

        EpochRecord rec;
        rec.epoch = s;
        rec.radius = prob.radius;
        rec.iterations = k;
        rec.samples = res.state.samples_used;
        if (diagnostics != nullptr) rec.gap = gap(*diagnostics, out.p);
        if (truth != nullptr) rec.error_sq = (out.p - *truth).squaredNorm();
        out.epochs.push_back(rec);
    }
    return out;
}

} // namespace lqrac
