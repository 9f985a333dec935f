#include "lqrac/oracle.hpp"

#include "lqrac/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqrac {

namespace {

void require_spd(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, std::string(what) + " must be square");
    if (!m.allFinite()) fail(ErrorCode::InvalidArgument, std::string(what) + " has non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        fail(ErrorCode::AsymmetricInput, std::string(what) + " is not symmetric");
    if (!(min_eig_sym(m) > 0.0)) fail(ErrorCode::InvalidArgument, std::string(what) + " is not positive definite");
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

} // namespace

LinearSystem::LinearSystem(Matrix a, Matrix b, Matrix q, Matrix r, Matrix psi, double sigma2)
    : a_(std::move(a)), b_(std::move(b)), q_(std::move(q)), r_(std::move(r)), psi_(std::move(psi)),
      sigma2_(sigma2) {
    if (a_.rows() == 0 || a_.rows() != a_.cols()) fail(ErrorCode::DimensionMismatch, "A must be square and non-empty");
    if (a_.rows() > kMaxDeskDim) fail(ErrorCode::InvalidArgument, "state dimension exceeds desk-scale limit");
    if (b_.rows() != a_.rows() || b_.cols() == 0)
        fail(ErrorCode::DimensionMismatch, "B must have as many rows as A and at least one column");
    if (q_.rows() != a_.rows() || q_.cols() != a_.rows()) fail(ErrorCode::DimensionMismatch, "Q must be n x n");
    if (r_.rows() != b_.cols() || r_.cols() != b_.cols()) fail(ErrorCode::DimensionMismatch, "R must be k x k");
    if (psi_.rows() != a_.rows() || psi_.cols() != a_.rows()) fail(ErrorCode::DimensionMismatch, "Psi must be n x n");
    if (!a_.allFinite() || !b_.allFinite()) fail(ErrorCode::InvalidArgument, "A and B must be finite");
    require_spd(q_, "Q");
    require_spd(r_, "R");
    require_spd(psi_, "Psi");
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_))
        fail(ErrorCode::InvalidArgument, "exploration variance must be positive and finite");
    q_ = sym(q_);
    r_ = sym(r_);
    psi_ = sym(psi_);
    psi_chol_ = psi_.llt().matrixL();
    noise_cov_ = sym(psi_ + sigma2_ * b_ * b_.transpose());
}

Policy::Policy(const LinearSystem& sys, Matrix k) : k_(std::move(k)) {
    if (k_.rows() != sys.k() || k_.cols() != sys.n()) {
        std::ostringstream os;
        os << "gain must be " << sys.k() << "x" << sys.n() << ", got " << k_.rows() << "x" << k_.cols();
        fail(ErrorCode::DimensionMismatch, os.str());
    }
    if (!k_.allFinite()) fail(ErrorCode::InvalidArgument, "gain has non-finite entries");
    rho_ = spectral_radius(sys.a() - sys.b() * k_);
}

void require_stable(const Policy& k, const char* what) {
    if (!k.stable()) {
        std::ostringstream os;
        os << what << " is not stabilizing: rho(A - BK) = " << k.rho();
        fail(ErrorCode::UnstablePolicy, os.str());
    }
}

PolicyQuantities policy_quantities(const LinearSystem& sys, const Policy& k, LyapunovBackend backend) {
    require_stable(k);
    const Matrix& K = k.k();
    const Matrix f = sys.a() - sys.b() * K;
    const Matrix cost = sym(sys.q() + K.transpose() * sys.r() * K);
    LyapunovOptions opts;
    opts.backend = backend;

    PolicyQuantities out;
    out.sigma = solve_dlyap(f, sys.noise_cov(), opts).solution;
    out.p = solve_dlyap(f.transpose(), cost, opts).solution;
    out.j = (cost * out.sigma).trace() + sys.sigma2() * sys.r().trace();

    const Matrix btp = sys.b().transpose() * out.p;
    out.e = (sys.r() + btp * sys.b()) * K - btp * sys.a();
    out.grad = 2.0 * out.e * out.sigma;

    const Eigen::Index n = sys.n();
    const Eigen::Index m = n + sys.k();
    Matrix ab(n, m);
    ab << sys.a(), sys.b();
    out.theta = ab.transpose() * out.p * ab;
    out.theta.topLeftCorner(n, n) += sys.q();
    out.theta.bottomRightCorner(sys.k(), sys.k()) += sys.r();
    out.theta = sym(out.theta);

    out.vartheta.resize(sys.unknown_dim());
    out.vartheta(0) = out.j;
    out.vartheta.tail(SymVec::length_for(m)) = svec(out.theta).data();
    return out;
}

RiccatiSolution solve_dare(const LinearSystem& sys, const RiccatiOptions& opts) {
    return solve_dare(sys.a(), sys.b(), sys.q(), sys.r(), opts);
}

Optimum optimum(const LinearSystem& sys) {
    Optimum out;
    out.riccati = solve_dare(sys);
    out.quantities = policy_quantities(sys, Policy(sys, out.riccati.k));
    return out;
}

double cost_identity_gap(const LinearSystem& sys, const Policy& k) {
    const PolicyQuantities pq = policy_quantities(sys, k);
    const Matrix& K = k.k();
    const double lhs = ((sys.q() + K.transpose() * sys.r() * K) * pq.sigma).trace();
    const double rhs = (pq.p * sys.noise_cov()).trace();
    return std::abs(lhs - rhs) / std::max(1.0, pq.j);
}

PerformanceDifference performance_difference(const LinearSystem& sys, const Policy& k, const Policy& kp) {
    const PolicyQuantities q0 = policy_quantities(sys, k);
    const PolicyQuantities q1 = policy_quantities(sys, kp);
    const Matrix d = kp.k() - k.k();
    const Matrix curvature = sys.r() + sys.b().transpose() * q0.p * sys.b();
    PerformanceDifference out;
    out.lhs = q1.j - q0.j;
    out.rhs = 2.0 * (q1.sigma * d.transpose() * q0.e).trace() + (q1.sigma * d.transpose() * curvature * d).trace();
    return out;
}

Sandwich pl_sandwich(const LinearSystem& sys, const Policy& k, const Optimum& opt) {
    const PolicyQuantities pq = policy_quantities(sys, k);
    const double e2 = pq.e.squaredNorm();
    const Matrix curvature = sys.r() + sys.b().transpose() * pq.p * sys.b();
    Sandwich out;
    out.lower = min_eig_sym(sys.psi()) / op_norm(curvature) * e2;
    out.mid = pq.j - opt.quantities.j;
    out.upper = op_norm(opt.quantities.sigma) / min_eig_sym(sys.r()) * e2;
    return out;
}

ActorConstants actor_constants(const LinearSystem& sys, double j0, double jstar, double epsilon) {
    if (!(j0 > 0.0) || !(jstar > 0.0)) fail(ErrorCode::InvalidArgument, "costs must be positive");
    if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be positive");
    const double s_psi = min_eig_sym(sys.psi());
    const double s_q = min_eig_sym(sys.q());
    const double s_r = min_eig_sym(sys.r());
    const double s_psi_sigma = min_eig_sym(sys.noise_cov());
    const double nb = op_norm(sys.b());

    ActorConstants c;
    c.c1 = 2.0 * (op_norm(sys.r()) + 2.0 * nb * nb * j0 / s_psi);
    c.c2 = s_psi * s_q * s_r;
    c.c3 = j0 / s_q;
    c.c4 = std::pow(s_q * s_psi * c.c1 / (16.0 * j0 * nb), 2);
    c.c5 = std::pow(s_psi_sigma * c.c2 * epsilon / (3840.0 * j0 * nb * c.c3 * c.c3), 2.0 / 3.0);
    c.c6 = c.c2 / (120.0 * j0 * c.c1) * std::min(c.c2 / (s_psi * jstar), 1.0 / (2.0 * c.c3)) * epsilon;
    c.eta = 1.0 / (2.0 * c.c1);
    c.kappa = 8.0 * jstar * c.c1 / c.c2;
    c.l_clamped = c.kappa < 0.5;
    c.l = std::max(1L, static_cast<long>(std::ceil(c.kappa)));
    c.rho_bar = std::sqrt(std::max(0.0, 1.0 - s_psi * s_q / j0));
    return c;
}

bool TraceBounds::hold(double slack) const noexcept {
    const auto le = [slack](double a, double b) { return a <= b + slack * std::max(1.0, std::abs(b)); };
    return le(sigma_norm, sigma_trace) && le(sigma_trace, sigma_bound) && le(p_norm, p_trace) && le(p_trace, p_bound);
}

TraceBounds trace_bounds(const LinearSystem& sys, const PolicyQuantities& pq) {
    TraceBounds t;
    t.sigma_norm = op_norm(pq.sigma);
    t.sigma_trace = pq.sigma.trace();
    t.sigma_bound = pq.j / min_eig_sym(sys.q());
    t.p_norm = op_norm(pq.p);
    t.p_trace = pq.p.trace();
    t.p_bound = pq.j / min_eig_sym(sys.psi());
    return t;
}

double perturbation_radius(const LinearSystem& sys, const Policy& k, const PolicyQuantities& pq) {
    const double closed = op_norm(sys.a() - sys.b() * k.k());
    return min_eig_sym(sys.q()) * min_eig_sym(pq.sigma) / (4.0 * pq.j * op_norm(sys.b()) * (closed + 1.0));
}

double perturbation_bound(const LinearSystem& sys, const Policy& k, const PolicyQuantities& pq, double dist) {
    const double closed = op_norm(sys.a() - sys.b() * k.k());
    const double ratio = pq.j / min_eig_sym(sys.q());
    return 4.0 * ratio * ratio * op_norm(sys.b()) * (closed + 1.0) / min_eig_sym(pq.sigma) * dist;
}

ViMonotonicity vi_monotonicity(const LinearSystem& sys, const Policy& k, const Optimum& opt) {
    const PolicyQuantities pq = policy_quantities(sys, k);
    const Matrix d = k.k() - opt.riccati.k;
    ViMonotonicity out;
    out.inner = 2.0 * (opt.quantities.sigma * d.transpose() * pq.e).trace();
    out.gap = pq.j - opt.quantities.j;
    return out;
}

} // namespace lqrac
