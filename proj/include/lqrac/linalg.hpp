#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace lqrac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest matrix side accepted by the dense kernels. Everything here is O(n^3)
// or worse (the Kronecker Lyapunov solve is O(n^6)), so this is a desk-scale
// library by construction.
inline constexpr Eigen::Index kMaxDeskDim = 50;

// A matrix is treated as stable when its spectral radius is below 1 - kStabilityMargin.
inline constexpr double kStabilityMargin = 1e-12;

// Symmetric vectorization: upper triangle in row-major order, off-diagonal
// entries scaled by sqrt(2) so that <svec(X), svec(Y)> = Tr(XY).
class SymVec {
public:
    SymVec() = default;
    SymVec(Eigen::Index dim, Vector data);

    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] const Vector& data() const noexcept { return data_; }

    static constexpr Eigen::Index length_for(Eigen::Index dim) noexcept { return dim * (dim + 1) / 2; }

private:
    Eigen::Index dim_ = 0;
    Vector data_;
};

SymVec svec(const Matrix& x, double symmetry_tol = 1e-9);
Matrix smat(const SymVec& v);

// Position of entry (i, j), i <= j, inside svec of an m x m matrix.
Eigen::Index svec_index(Eigen::Index m, Eigen::Index i, Eigen::Index j) noexcept;

double spectral_radius(const Matrix& m);
[[nodiscard]] inline bool is_stable(double rho) noexcept { return rho < 1.0 - kStabilityMargin; }

// Induced 2-norm and smallest singular value.
double op_norm(const Matrix& m);
double sigma_min(const Matrix& m);
// Smallest eigenvalue of a symmetric matrix.
double min_eig_sym(const Matrix& m);

struct LyapunovSolution {
    Matrix solution;
    double residual = 0.0;
    long iterations = 0;
};

enum class LyapunovBackend { Direct, FixedPoint };

struct LyapunovOptions {
    LyapunovBackend backend = LyapunovBackend::Direct;
    // Relative residual accepted on success: ||S - W - F S F^T||_F <= tol * max(1, ||S||_F).
    double tolerance = 1e-9;
    long max_iterations = 1'000'000;
};

// Solves S = W + F S F^T for stable F.
LyapunovSolution solve_dlyap(const Matrix& f, const Matrix& w, const LyapunovOptions& opts = {});

struct RiccatiSolution {
    Matrix p;
    Matrix k;
    double residual = 0.0;
    long iterations = 0;
};

struct RiccatiOptions {
    double tolerance = 1e-10;
    long max_iterations = 1'000'000;
};

double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, const Matrix& p);
bool is_controllable(const Matrix& a, const Matrix& b);

// Value iteration on the discrete Riccati map starting from P0 = Q.
RiccatiSolution solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                           const RiccatiOptions& opts = {});

} // namespace lqrac
