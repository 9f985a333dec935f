#pragma once

#include "lqrac/simulator.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace lqrac {

class SampleOracle {
public:
    virtual ~SampleOracle() = default;
    virtual SampleBatch draw() = 0;
    [[nodiscard]] virtual bool exact() const noexcept = 0;
};

// Always returns the true (H, b); consumes no samples.
class ExactOracle final : public SampleOracle {
public:
    explicit ExactOracle(BellmanSystem system) : system_(std::move(system)) {}
    SampleBatch draw() override;
    [[nodiscard]] bool exact() const noexcept override { return true; }
    [[nodiscard]] const BellmanSystem& system() const noexcept { return system_; }

private:
    BellmanSystem system_;
};

// Pulls single-pair estimates from a running trajectory, tau transitions apart.
class MarkovOracle final : public SampleOracle {
public:
    MarkovOracle(const LinearSystem& sys, Policy k, TrajectoryState& state, long tau,
                 NextAction next = NextAction::Sampled);
    SampleBatch draw() override;
    [[nodiscard]] bool exact() const noexcept override { return false; }

private:
    const LinearSystem& sys_;
    Policy k_;
    TrajectoryState& state_;
    long tau_;
    NextAction next_;
};

// min over the primal ball, max over the unit dual ball, of <y, Hx - b>,
// with Bregman divergence 1/2 ||.||^2 on both sides.
struct SaddleProblem {
    SampleOracle* oracle = nullptr;
    Vector center;
    double radius = 0.0; // D_s: primal set is {x : 1/2 ||x - center||^2 <= D_s^2}
    double h_norm = 0.0;
    double dual_radius = 1.0;

    [[nodiscard]] Eigen::Index dim() const noexcept { return center.size(); }
    // sqrt of the largest divergence between two points of each set.
    [[nodiscard]] double primal_diameter() const noexcept { return 2.0 * radius; }
    [[nodiscard]] double dual_diameter() const noexcept;
    [[nodiscard]] Vector project_primal(const Vector& x) const;
    [[nodiscard]] Vector project_dual(const Vector& y) const;
};

struct Schedule {
    long k = 0;
    double h_norm = 0.0;
    double d_x = 0.0;
    double d_y = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double p = 2.0 / 3.0;
    double q = 2.0 / 3.0;
    long tau = 1;
    double delta = 0.0;

    [[nodiscard]] double eta(long t) const;
    [[nodiscard]] double lambda(long t) const;
    [[nodiscard]] double theta(long t) const;
    [[nodiscard]] double gamma(long t) const;
    // Throws InvalidSchedule naming the first violated condition and t.
    void validate() const;
};

Schedule default_schedule(const SaddleProblem& prob, long k, double sigma_x, double sigma_y);

struct PDState {
    Vector x_prev;
    Vector x_curr;
    Vector y_curr;
    Vector z;
    long t = 0;
    Vector x_bar;
    Vector y_bar;
    long samples_used = 0;
};

struct TraceRow {
    long t = 0;
    double eta = 0.0;
    double lambda = 0.0;
    long samples = 0;
    double gap = std::numeric_limits<double>::quiet_NaN();
};

using TraceSink = std::function<void(const TraceRow&)>;

struct CspdResult {
    Vector x_bar;
    Vector y_bar;
    PDState state;
};

// diagnostics, when given, is used only to fill TraceRow::gap.
CspdResult cspd_run(const SaddleProblem& prob, const Schedule& schedule, const Vector& x_init, const Vector& y_init,
                    const BellmanSystem* diagnostics = nullptr, const TraceSink& sink = {});

// ||H x - b||: the gap under the unit dual ball.
double gap(const BellmanSystem& system, const Vector& x);

enum class BudgetMode { Practical, Theory };

// Inputs for the theory-mode per-epoch iteration count.
struct TheoryBudget {
    double mu = 0.0;
    double delta = 0.0;
};

double theory_epoch_iterations(long s, double h_norm, double mu, double d_y, double d0, double sigma_x, double sigma_y,
                               double delta);

struct EpochConfig {
    long epochs = 1;
    // Practical mode: iterations for epoch s is iterations[min(s, size) - 1].
    std::vector<long> iterations;
    BudgetMode mode = BudgetMode::Practical;
    TheoryBudget theory;
    double d0 = 1.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double h_norm = 0.0;
    long tau = 1;
    // 0 means no cap. Checked before an epoch starts.
    long max_samples = 0;
};

struct EpochRecord {
    long epoch = 0;
    double radius = 0.0;
    long iterations = 0;
    long samples = 0;
    double gap = std::numeric_limits<double>::quiet_NaN();
    double error_sq = std::numeric_limits<double>::quiet_NaN();
};

struct MultiEpochResult {
    Vector p;
    std::vector<EpochRecord> epochs;
    long samples = 0;
};

// diagnostics/truth feed only the per-epoch records.
MultiEpochResult multi_epoch_run(SampleOracle& oracle, const Vector& p0, const EpochConfig& config,
                                 const BellmanSystem* diagnostics = nullptr, const Vector* truth = nullptr,
                                 const TraceSink& sink = {});

} // namespace lqrac
