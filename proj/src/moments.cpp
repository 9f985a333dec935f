#include "lqrac/moments.hpp"

#include "lqrac/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <utility>

namespace lqrac {

namespace {

constexpr std::size_t kMaxOrder = 16;

double isserlis_rec(const Matrix& sigma, std::array<Eigen::Index, kMaxOrder>& idx, std::size_t len) {
    if (len == 0) return 1.0;
    const Eigen::Index first = idx[0];
    double total = 0.0;
    for (std::size_t j = 1; j < len; ++j) {
        const double c = sigma(first, idx[j]);
        if (c == 0.0) continue;
        // Remove positions 0 and j, keep the rest in place.
        std::array<Eigen::Index, kMaxOrder> rest{};
        std::size_t r = 0;
        for (std::size_t i = 1; i < len; ++i)
            if (i != j) rest[r++] = idx[i];
        total += c * isserlis_rec(sigma, rest, len - 2);
    }
    return total;
}

void check_indices(const Matrix& sigma, std::span<const Eigen::Index> indices) {
    if (indices.size() > kMaxOrder) fail(ErrorCode::InvalidArgument, "moment order above 16 is not supported");
    for (const auto i : indices)
        if (i < 0 || i >= sigma.rows()) fail(ErrorCode::InvalidArgument, "moment index out of range");
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

} // namespace

double isserlis_moment(const Matrix& sigma, std::span<const Eigen::Index> indices) {
    check_indices(sigma, indices);
    if (indices.size() % 2 == 1) return 0.0;
    std::array<Eigen::Index, kMaxOrder> idx{};
    std::copy(indices.begin(), indices.end(), idx.begin());
    return isserlis_rec(sigma, idx, indices.size());
}

double gaussian_moment(const Vector& mu, const Matrix& sigma, std::span<const Eigen::Index> indices) {
    check_indices(sigma, indices);
    if (mu.size() != sigma.rows()) fail(ErrorCode::DimensionMismatch, "mean and covariance sizes differ");
    const std::size_t len = indices.size();
    double total = 0.0;
    std::array<Eigen::Index, kMaxOrder> centred{};
    // Bit i set: factor i comes from the centred part.
    for (unsigned mask = 0; mask < (1U << len); ++mask) {
        if (std::popcount(mask) % 2 == 1) continue;
        double mean_part = 1.0;
        std::size_t c = 0;
        for (std::size_t i = 0; i < len; ++i) {
            if (mask & (1U << i)) centred[c++] = indices[i];
            else mean_part *= mu(indices[i]);
        }
        if (mean_part == 0.0) continue;
        total += mean_part * isserlis_rec(sigma, centred, c);
    }
    return total;
}

JointGaussian pair_law(const LinearSystem& sys, const Policy& k, const Vector& mean_x, const Matrix& cov_x,
                       NextAction next) {
    const Eigen::Index n = sys.n();
    const Eigen::Index kk = sys.k();
    const Eigen::Index m = n + kk;
    if (mean_x.size() != n || cov_x.rows() != n || cov_x.cols() != n)
        fail(ErrorCode::DimensionMismatch, "state law has wrong size");
    const Matrix& K = k.k();

    // Independent base variables: x_t, v_t, w_t, v_{t+1}.
    const Eigen::Index nb = 2 * n + 2 * kk;
    const Eigen::Index ov = n, ow = n + kk, ov2 = 2 * n + kk;
    Matrix d = Matrix::Zero(nb, nb);
    d.block(0, 0, n, n) = cov_x;
    d.block(ov, ov, kk, kk) = sys.sigma2() * Matrix::Identity(kk, kk);
    d.block(ow, ow, n, n) = sys.psi();
    d.block(ov2, ov2, kk, kk) = sys.sigma2() * Matrix::Identity(kk, kk);
    Vector base_mean = Vector::Zero(nb);
    base_mean.head(n) = mean_x;

    Matrix l = Matrix::Zero(2 * m, nb);
    l.block(0, 0, n, n) = Matrix::Identity(n, n);
    l.block(n, 0, kk, n) = -K;
    l.block(n, ov, kk, kk) = Matrix::Identity(kk, kk);
    Matrix xp = Matrix::Zero(n, nb);
    xp.block(0, 0, n, n) = sys.a() - sys.b() * K;
    xp.block(0, ov, n, kk) = sys.b();
    xp.block(0, ow, n, n) = Matrix::Identity(n, n);
    l.block(m, 0, n, nb) = xp;
    l.block(m + n, 0, kk, nb) = -K * xp;
    if (next == NextAction::Sampled) l.block(m + n, ov2, kk, kk) += Matrix::Identity(kk, kk);

    JointGaussian out;
    out.mean = l * base_mean;
    out.cov = sym(l * d * l.transpose());
    return out;
}

StationaryModel stationary_model(const LinearSystem& sys, const Policy& k, NextAction next) {
    const PolicyQuantities pq = policy_quantities(sys, k);
    StationaryModel out;
    out.pair = pair_law(sys, k, Vector::Zero(sys.n()), pq.sigma, next);
    const Eigen::Index m = sys.n() + sys.k();
    out.sigma_tilde = out.pair.cov.topLeftCorner(m, m);
    out.cross_cov = out.pair.cov.topRightCorner(m, m);
    out.rho = k.rho();
    return out;
}

Matrix state_cov_after(const LinearSystem& sys, const Policy& k, long t) {
    if (t < 0) fail(ErrorCode::InvalidArgument, "time index must be non-negative");
    const Matrix f = sys.a() - sys.b() * k.k();
    Matrix s = Matrix::Zero(sys.n(), sys.n());
    for (long p = 0; p < t; ++p) s = sym(sys.noise_cov() + f * s * f.transpose());
    return s;
}

Matrix state_action_cov(const LinearSystem& sys, const Policy& k, const Matrix& state_cov) {
    const Eigen::Index n = sys.n();
    const Eigen::Index kk = sys.k();
    const Matrix& K = k.k();
    Matrix out(n + kk, n + kk);
    out.topLeftCorner(n, n) = state_cov;
    out.topRightCorner(n, kk) = -state_cov * K.transpose();
    out.bottomLeftCorner(kk, n) = -K * state_cov;
    out.bottomRightCorner(kk, kk) = K * state_cov * K.transpose() + sys.sigma2() * Matrix::Identity(kk, kk);
    return sym(out);
}

BellmanSystem bellman_from_pair_law(const LinearSystem& sys, const JointGaussian& law) {
    const Eigen::Index n = sys.n();
    const Eigen::Index m = n + sys.k();
    if (law.cov.rows() != 2 * m) fail(ErrorCode::DimensionMismatch, "pair law has wrong size");
    const Eigen::Index d = SymVec::length_for(m);
    const bool centred = law.mean.isZero(0.0);
    const auto moment = [&](std::initializer_list<Eigen::Index> ids) {
        const std::span<const Eigen::Index> s(ids.begin(), ids.size());
        return centred ? isserlis_moment(law.cov, s) : gaussian_moment(law.mean, law.cov, s);
    };

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    std::vector<double> scale;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i; j < m; ++j) {
            pairs.emplace_back(i, j);
            scale.push_back(i == j ? 1.0 : std::sqrt(2.0));
        }

    Matrix weight = Matrix::Zero(m, m);
    weight.topLeftCorner(n, n) = sys.q();
    weight.bottomRightCorner(sys.k(), sys.k()) = sys.r();

    BellmanSystem out;
    out.h = Matrix::Zero(d + 1, d + 1);
    out.b = Vector::Zero(d + 1);
    out.h(0, 0) = 1.0;
    for (Eigen::Index u = 0; u < m; ++u)
        for (Eigen::Index v = 0; v < m; ++v)
            if (weight(u, v) != 0.0) out.b(0) += weight(u, v) * moment({u, v});

    for (Eigen::Index p = 0; p < d; ++p) {
        const auto [i, j] = pairs[static_cast<std::size_t>(p)];
        const double sp = scale[static_cast<std::size_t>(p)];
        out.h(p + 1, 0) = sp * moment({i, j});
        for (Eigen::Index q = 0; q < d; ++q) {
            const auto [u, v] = pairs[static_cast<std::size_t>(q)];
            const double sq = scale[static_cast<std::size_t>(q)];
            out.h(p + 1, q + 1) = sp * sq * (moment({i, j, u, v}) - moment({i, j, m + u, m + v}));
        }
        double acc = 0.0;
        for (Eigen::Index u = 0; u < m; ++u)
            for (Eigen::Index v = 0; v < m; ++v)
                if (weight(u, v) != 0.0) acc += weight(u, v) * moment({i, j, u, v});
        out.b(p + 1) = sp * acc;
    }
    out.exact = true;
    return out;
}

BellmanSystem exact_bellman_system(const LinearSystem& sys, const Policy& k, NextAction next) {
    const StationaryModel model = stationary_model(sys, k, next);
    return bellman_from_pair_law(sys, model.pair);
}

BellmanSystem conditional_bellman_system(const LinearSystem& sys, const Policy& k, const Vector& x0, long tau,
                                         NextAction next) {
    require_stable(k);
    if (tau < 1) fail(ErrorCode::InvalidArgument, "tau must be at least 1");
    if (x0.size() != sys.n()) fail(ErrorCode::DimensionMismatch, "initial state has wrong size");
    const Matrix f = sys.a() - sys.b() * k.k();
    Vector mean = x0;
    for (long p = 0; p < tau - 1; ++p) mean = f * mean;
    return bellman_from_pair_law(sys, pair_law(sys, k, mean, state_cov_after(sys, k, tau - 1), next));
}

double bellman_residual(const BellmanSystem& bs, const Vector& x) {
    if (x.size() != bs.b.size()) fail(ErrorCode::DimensionMismatch, "vector length does not match the system");
    return (bs.h * x - bs.b).norm();
}

double sharpness_lower_bound(const LinearSystem& sys, const Policy& k) {
    const PolicyQuantities pq = policy_quantities(sys, k);
    const double nk = op_norm(k.k());
    const double s_psi = min_eig_sym(sys.psi());
    const double s2 = sys.sigma2();
    const double rho = k.rho();
    const double denom = 1.0 + (1.0 + nk) * (1.0 + nk) * pq.j / min_eig_sym(sys.q()) + s2 * static_cast<double>(sys.k());
    const double branch = std::min(std::max(0.0, s2 - s_psi * nk * nk), s_psi);
    return 0.5 * std::min(1.0, (1.0 - rho * rho) * branch / denom);
}

double gaussian_norm_tail(const Vector& mu, const Matrix& sigma, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    if (mu.size() != sigma.rows()) fail(ErrorCode::DimensionMismatch, "mean and covariance sizes differ");
    const double mean_part = 2.0 * mu.squaredNorm();
    const double op = op_norm(sigma);
    if (op == 0.0) return mean_part;
    const double fro = sigma.norm();
    const double lead = 4.0 * op * std::sqrt(std::log(1.0 / delta)) + fro;
    return (lead * lead - fro * fro) / (8.0 * op) + sigma.trace() + mean_part;
}

double fit_mixing_gamma(const Matrix& f, double rate, long horizon) {
    if (!(rate > 0.0)) fail(ErrorCode::InvalidArgument, "mixing rate must be positive");
    Matrix power = Matrix::Identity(f.rows(), f.cols());
    double gamma = 1.0;
    double scale = 1.0;
    for (long p = 1; p <= horizon; ++p) {
        power = f * power;
        scale *= rate;
        const double nrm = op_norm(power);
        if (nrm < 1e-250 || scale < 1e-250) break;
        gamma = std::max(gamma, nrm / scale);
    }
    return gamma;
}

double BiasConstants::h_bias_envelope(long tau) const {
    return c * m_h * std::pow(std::log(std::exp(1.0) / delta), 1.25) * std::pow(rho, static_cast<double>(tau)) +
           o_h * std::sqrt(delta);
}

double BiasConstants::b_bias_envelope(long tau) const {
    return c * m_b * std::pow(std::log(std::exp(1.0) / delta), 1.25) * std::pow(rho, static_cast<double>(tau)) +
           o_b * std::sqrt(delta);
}

BiasConstants bias_constants(const LinearSystem& sys, const Policy& k, double x0_norm, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    if (!(x0_norm >= 0.0)) fail(ErrorCode::InvalidArgument, "initial-state norm must be non-negative");
    const StationaryModel model = stationary_model(sys, k);
    const PolicyQuantities pq = policy_quantities(sys, k);
    const auto n = static_cast<double>(sys.n());
    const auto kk = static_cast<double>(sys.k());
    const double s_q = min_eig_sym(sys.q());
    const double s_psi = min_eig_sym(sys.psi());
    const double qr = std::max(op_norm(sys.q()), op_norm(sys.r()));
    const double nk = op_norm(k.k());

    BiasConstants c;
    c.delta = delta;
    c.rho = k.rho();
    const double inner = 5.0 * pq.j / s_q + 2.0 * x0_norm * x0_norm + (4.0 + kk) * sys.sigma2();
    c.m_h = 17.0 * std::pow(1.0 + nk, 4) * std::max(1.0, inner * inner);
    c.m_b = c.m_h * qr;
    c.r_star = sys.q().norm() + sys.r().norm() + (sys.a().squaredNorm() + sys.b().squaredNorm()) * pq.j / s_psi;
    c.l_h = 1.0 + 4.0 * (1.0 + k.k().squaredNorm()) * pq.j / s_q + sys.sigma2() * (kk + 2.0);
    c.b_bound = c.l_h * c.r_star;
    c.c = 0.5 * (c.m_h + std::sqrt(n / (1.0 - c.rho)));
    const double st = op_norm(model.sigma_tilde);
    const double growth = std::max(st * st, std::pow(st, 4));
    c.o_h = 65.0 * (n + kk) * growth;
    c.o_b = 41.0 * qr * (n + kk) * (n + kk) * growth;
    c.mixing_rho = 0.5 * (1.0 + c.rho);
    c.mixing_gamma = fit_mixing_gamma(sys.a() - sys.b() * k.k(), c.mixing_rho);
    c.mixing_prefactor =
        0.5 * c.mixing_gamma * std::sqrt(x0_norm * x0_norm + n / (1.0 - c.mixing_rho * c.mixing_rho));
    return c;
}

double event_threshold(const LinearSystem& sys, const Policy& k, long t, double x0u0_sq_norm, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    const Matrix cov = state_action_cov(sys, k, state_cov_after(sys, k, t));
    return (4.0 * op_norm(cov) + cov.trace() + 2.0 * x0u0_sq_norm) * std::sqrt(std::log(std::exp(1.0) / delta));
}

} // namespace lqrac
