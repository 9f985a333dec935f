#pragma once

#include "lqrac/actor.hpp"
#include "lqrac/oracle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lqrac::harness {

enum class OutputFormat { Csv, Json };

// Noise levels of the critic step sizes: fixed numbers, or the bound-based values at K0.
enum class NoiseSource { Fixed, Theory };

struct RunConfig {
    Matrix a, b, q, r, psi;
    double sigma2 = 0.01;
    Matrix k0;

    ActorConfig actor;
    // Critic radius; empty means the bound on ||vartheta(K0)||.
    std::optional<double> d0;
    NoiseSource noise = NoiseSource::Fixed;
    double delta_star = 0.1;

    std::vector<std::uint64_t> seeds;
    std::string output;
    OutputFormat format = OutputFormat::Csv;
    unsigned threads = 0; // 0: hardware concurrency

    // evaluate subcommand
    std::optional<Matrix> evaluate_k;
    GradientMode evaluate_mode = GradientMode::Oracle;

    [[nodiscard]] LinearSystem system() const;

    // Canonical JSON text; parsing it back yields the same configuration.
    [[nodiscard]] std::string echo() const;
    // FNV-1a over echo() without the output, format and threads entries.
    [[nodiscard]] std::uint64_t hash() const;
};

// Scalar system with A = B = 1, Q = R = 100, Psi = 0.01, sigma = 0.1, K0 = 1, T = 50,
// three critic epochs and twenty seeds.
RunConfig default_config();

// Keys absent from the text keep their default_config() values. Unknown keys are errors.
// Relative system_file paths resolve against base_dir.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::vector<std::uint64_t> seeds_from_master(std::uint64_t master, std::size_t count);

std::string cmd_solve(const RunConfig& cfg);
std::string cmd_constants(const RunConfig& cfg);
std::string cmd_evaluate(const RunConfig& cfg);
// Trains on the first seed; writes the seed record when an output directory is set.
std::string cmd_train(const RunConfig& cfg);
// Runs every seed, writes per-seed records, both aggregates, the figures and the config echo.
std::string cmd_experiment(const RunConfig& cfg);

struct SeedRecord {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<ActorRow> rows;
    std::string failure;  // non-empty when the seed produced no trace
    std::string diverged; // non-empty when the trace was censored
    std::vector<long> flagged;
};

// Version tag written on the first line of every record and aggregate file.
inline constexpr const char* kRecordSchema = "lqrac-record v1";
inline constexpr const char* kAggregateSchema = "lqrac-aggregate v1";

std::string format_double(double v);
std::string record_csv(const SeedRecord& rec);
SeedRecord parse_record_csv(const std::string& text);

struct AggregateRow {
    double x = 0.0, median = 0.0, p10 = 0.0, p90 = 0.0;
};

// p in [0, 100]. Linear interpolation between closest ranks; infinities sort last.
double percentile(std::vector<double> values, double p);

enum class Axis { Iteration, Samples };
std::vector<AggregateRow> aggregate(const std::vector<SeedRecord>& records, Axis axis);
std::string aggregate_csv(const std::vector<SeedRecord>& records, Axis axis);
std::string figure_svg(const std::vector<AggregateRow>& rows, Axis axis, const std::string& title);

// Re-reads seed_*.csv in dir and rewrites both aggregate files and figures; returns a summary.
std::string reaggregate(const std::string& dir);

} // namespace lqrac::harness
