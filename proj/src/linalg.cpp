#include "lqrac/linalg.hpp"

#include "lqrac/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqrac {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << what << " must be square, got " << m.rows() << "x" << m.cols();
        fail(ErrorCode::DimensionMismatch, os.str());
    }
    if (m.rows() > kMaxDeskDim) {
        std::ostringstream os;
        os << what << " side " << m.rows() << " exceeds desk-scale limit " << kMaxDeskDim;
        fail(ErrorCode::InvalidArgument, os.str());
    }
    if (!m.allFinite()) fail(ErrorCode::InvalidArgument, std::string(what) + " has non-finite entries");
}

} // namespace

SymVec::SymVec(Eigen::Index dim, Vector data) : dim_(dim), data_(std::move(data)) {
    if (dim < 0 || data_.size() != length_for(dim)) {
        std::ostringstream os;
        os << "svec of a " << dim << "x" << dim << " matrix needs " << length_for(dim) << " entries, got "
           << data_.size();
        fail(ErrorCode::DimensionMismatch, os.str());
    }
}

Eigen::Index svec_index(Eigen::Index m, Eigen::Index i, Eigen::Index j) noexcept {
    if (i > j) std::swap(i, j);
    // rows 0..i-1 contribute m, m-1, ..., m-i+1 entries
    return i * m - i * (i - 1) / 2 + (j - i);
}

SymVec svec(const Matrix& x, double symmetry_tol) {
    require_square(x, "svec input");
    const Eigen::Index m = x.rows();
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if ((x - x.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale)
        fail(ErrorCode::AsymmetricInput, "svec input is not symmetric");
    Vector out(SymVec::length_for(m));
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        out(pos++) = x(i, i);
        for (Eigen::Index j = i + 1; j < m; ++j) out(pos++) = kSqrt2 * 0.5 * (x(i, j) + x(j, i));
    }
    return SymVec(m, std::move(out));
}

Matrix smat(const SymVec& v) {
    const Eigen::Index m = v.dim();
    Matrix out(m, m);
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        out(i, i) = v.data()(pos++);
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double val = v.data()(pos++) / kSqrt2;
            out(i, j) = val;
            out(j, i) = val;
        }
    }
    return out;
}

double spectral_radius(const Matrix& m) {
    require_square(m, "spectral_radius input");
    if (m.rows() == 0) return 0.0;
    if (m.rows() == 1) return std::abs(m(0, 0));
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "eigenvalue iteration did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double op_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double sigma_min(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

double min_eig_sym(const Matrix& m) {
    require_square(m, "min_eig_sym input");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) fail(ErrorCode::ConvergenceFailure, "symmetric eigensolver did not converge");
    return es.eigenvalues()(0);
}

LyapunovSolution solve_dlyap(const Matrix& f, const Matrix& w, const LyapunovOptions& opts) {
    require_square(f, "Lyapunov F");
    require_square(w, "Lyapunov W");
    if (f.rows() != w.rows()) fail(ErrorCode::DimensionMismatch, "Lyapunov F and W sizes differ");
    const double rho = spectral_radius(f);
    if (!is_stable(rho)) {
        std::ostringstream os;
        os << "Lyapunov equation needs rho(F) < 1, got " << rho;
        fail(ErrorCode::UnstableMatrix, os.str());
    }

    const Eigen::Index n = f.rows();
    LyapunovSolution out;
    if (opts.backend == LyapunovBackend::Direct) {
        // (I - F (x) F) vec(S) = vec(W), row-major vec: index i*n + j.
        const Eigen::Index nn = n * n;
        Matrix kron = Matrix::Identity(nn, nn);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index k = 0; k < n; ++k)
                    for (Eigen::Index l = 0; l < n; ++l) kron(i * n + j, k * n + l) -= f(i, k) * f(j, l);
        Vector rhs(nn);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) rhs(i * n + j) = w(i, j);
        const Vector sol = kron.partialPivLu().solve(rhs);
        out.solution.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) out.solution(i, j) = sol(i * n + j);
        out.iterations = 0;
    } else {
        Matrix s = w;
        long it = 0;
        for (;;) {
            Matrix next = w + f * s * f.transpose();
            ++it;
            const double step = (next - s).norm();
            s = std::move(next);
            if (step <= 1e-14 * std::max(1.0, s.norm())) break;
            if (it >= opts.max_iterations)
                fail(ErrorCode::ConvergenceFailure, "fixed-point Lyapunov iteration hit its iteration cap");
        }
        out.solution = std::move(s);
        out.iterations = it;
    }
    out.solution = 0.5 * (out.solution + out.solution.transpose()).eval();
    out.residual = (out.solution - w - f * out.solution * f.transpose()).norm();
    if (!(out.residual <= opts.tolerance * std::max(1.0, out.solution.norm()))) {
        std::ostringstream os;
        os << "Lyapunov residual " << out.residual << " above tolerance";
        fail(ErrorCode::ConvergenceFailure, os.str());
    }
    return out;
}

double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, const Matrix& p) {
    const Matrix bp = b.transpose() * p;
    const Matrix gain = (r + bp * b).ldlt().solve(bp * a);
    const Matrix next = q + a.transpose() * p * a - a.transpose() * p * b * gain;
    return (next - p).norm();
}

bool is_controllable(const Matrix& a, const Matrix& b) {
    const Eigen::Index n = a.rows();
    Matrix ctrb(n, n * b.cols());
    Matrix block = b;
    for (Eigen::Index i = 0; i < n; ++i) {
        ctrb.middleCols(i * b.cols(), b.cols()) = block;
        block = a * block;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(ctrb);
    qr.setThreshold(1e-10);
    return qr.rank() == n;
}

RiccatiSolution solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                           const RiccatiOptions& opts) {
    require_square(a, "A");
    require_square(q, "Q");
    require_square(r, "R");
    if (b.rows() != a.rows() || q.rows() != a.rows() || r.rows() != b.cols())
        fail(ErrorCode::DimensionMismatch, "Riccati data have inconsistent dimensions");
    if (!is_controllable(a, b)) fail(ErrorCode::NotControllable, "(A, B) is not controllable");

    RiccatiSolution out;
    Matrix p = q;
    long it = 0;
    for (;;) {
        const Matrix bp = b.transpose() * p;
        const Matrix gain = (r + bp * b).ldlt().solve(bp * a);
        Matrix next = q + a.transpose() * p * (a - b * gain);
        next = 0.5 * (next + next.transpose()).eval();
        ++it;
        // F(P) - P is exactly the Riccati residual at the previous iterate.
        const double step = (next - p).norm();
        p = std::move(next);
        if (!p.allFinite()) fail(ErrorCode::ConvergenceFailure, "Riccati iteration diverged");
        if (step <= opts.tolerance * std::max(1.0, p.norm())) break;
        if (it >= opts.max_iterations) fail(ErrorCode::ConvergenceFailure, "Riccati iteration hit its iteration cap");
    }
    // Newton polish: P <- Lyapunov solution for the current greedy gain.
    double res = riccati_residual(a, b, q, r, p);
    for (int polish = 0; polish < 3 && res > 0.0; ++polish) {
        const Matrix bp = b.transpose() * p;
        const Matrix gain = (r + bp * b).ldlt().solve(bp * a);
        const Matrix f = a - b * gain;
        if (!is_stable(spectral_radius(f))) break;
        const Matrix cand = solve_dlyap(f.transpose(), q + gain.transpose() * r * gain).solution;
        const double cand_res = riccati_residual(a, b, q, r, cand);
        if (!(cand_res < res)) break;
        p = cand;
        res = cand_res;
    }
    out.p = std::move(p);
    const Matrix bp = b.transpose() * out.p;
    out.k = (r + bp * b).ldlt().solve(bp * a);
    out.residual = res;
    out.iterations = it;
    if (!is_stable(spectral_radius(a - b * out.k)))
        fail(ErrorCode::ConvergenceFailure, "Riccati gain does not stabilize the closed loop");
    return out;
}

} // namespace lqrac
