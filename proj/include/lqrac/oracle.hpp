#pragma once

#include "lqrac/linalg.hpp"

namespace lqrac {

// Plant x' = A x + B u + w, w ~ N(0, Psi), driven by u = -K x + v, v ~ N(0, sigma2 I).
class LinearSystem {
public:
    LinearSystem(Matrix a, Matrix b, Matrix q, Matrix r, Matrix psi, double sigma2);

    [[nodiscard]] Eigen::Index n() const noexcept { return a_.rows(); }
    [[nodiscard]] Eigen::Index k() const noexcept { return b_.cols(); }
    [[nodiscard]] const Matrix& a() const noexcept { return a_; }
    [[nodiscard]] const Matrix& b() const noexcept { return b_; }
    [[nodiscard]] const Matrix& q() const noexcept { return q_; }
    [[nodiscard]] const Matrix& r() const noexcept { return r_; }
    [[nodiscard]] const Matrix& psi() const noexcept { return psi_; }
    [[nodiscard]] double sigma2() const noexcept { return sigma2_; }
    // Lower Cholesky factor of Psi, used to draw process noise.
    [[nodiscard]] const Matrix& psi_chol() const noexcept { return psi_chol_; }
    // Psi + sigma2 B B^T: total one-step noise covariance of the closed loop.
    [[nodiscard]] const Matrix& noise_cov() const noexcept { return noise_cov_; }
    // Length of the unknown (J, svec Theta).
    [[nodiscard]] Eigen::Index unknown_dim() const noexcept { return 1 + SymVec::length_for(n() + k()); }

private:
    Matrix a_, b_, q_, r_, psi_;
    double sigma2_;
    Matrix psi_chol_;
    Matrix noise_cov_;
};

class Policy {
public:
    Policy(const LinearSystem& sys, Matrix k);

    [[nodiscard]] const Matrix& k() const noexcept { return k_; }
    [[nodiscard]] double rho() const noexcept { return rho_; }
    [[nodiscard]] bool stable() const noexcept { return is_stable(rho_); }

private:
    Matrix k_;
    double rho_;
};

struct PolicyQuantities {
    Matrix sigma;   // stationary state covariance
    Matrix p;       // value matrix
    double j = 0.0; // average cost, including the sigma2 Tr R exploration term
    Matrix e;       // natural gradient
    Matrix grad;    // 2 e sigma
    Matrix theta;   // (n+k) x (n+k) Q-function matrix
    Vector vartheta;
};

// Throws UnstablePolicy when K does not stabilize the plant.
void require_stable(const Policy& k, const char* what = "policy");

PolicyQuantities policy_quantities(const LinearSystem& sys, const Policy& k,
                                   LyapunovBackend backend = LyapunovBackend::Direct);

RiccatiSolution solve_dare(const LinearSystem& sys, const RiccatiOptions& opts = {});

struct Optimum {
    RiccatiSolution riccati;
    PolicyQuantities quantities;
};

Optimum optimum(const LinearSystem& sys);

// |Tr[(Q + K^T R K) Sigma] - Tr[P (Psi + sigma2 B B^T)]| / max(1, J).
double cost_identity_gap(const LinearSystem& sys, const Policy& k);

struct PerformanceDifference {
    double lhs = 0.0;
    double rhs = 0.0;
};

PerformanceDifference performance_difference(const LinearSystem& sys, const Policy& k, const Policy& kp);

struct Sandwich {
    double lower = 0.0;
    double mid = 0.0;
    double upper = 0.0;
};

Sandwich pl_sandwich(const LinearSystem& sys, const Policy& k, const Optimum& opt);

struct ActorConstants {
    double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0;
    double eta = 0;
    double kappa = 0;
    long l = 1;
    bool l_clamped = false; // kappa < 1/2 forced l = 1
    double rho_bar = 0;
};

ActorConstants actor_constants(const LinearSystem& sys, double j0, double jstar, double epsilon);

struct TraceBounds {
    double sigma_norm = 0, sigma_trace = 0, sigma_bound = 0;
    double p_norm = 0, p_trace = 0, p_bound = 0;
    [[nodiscard]] bool hold(double slack = 1e-9) const noexcept;
};

TraceBounds trace_bounds(const LinearSystem& sys, const PolicyQuantities& pq);

// Radius within which a perturbed gain stays stable, and the covariance
// sensitivity bound that holds inside it.
double perturbation_radius(const LinearSystem& sys, const Policy& k, const PolicyQuantities& pq);
double perturbation_bound(const LinearSystem& sys, const Policy& k, const PolicyQuantities& pq, double dist);

struct ViMonotonicity {
    double inner = 0.0; // 2 Tr(Sigma_{K*} (K - K*)^T E_K)
    double gap = 0.0;   // J(K) - J(K*)
};

ViMonotonicity vi_monotonicity(const LinearSystem& sys, const Policy& k, const Optimum& opt);

} // namespace lqrac
