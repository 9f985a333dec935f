#include "lqrac/harness.hpp"

#include "lqrac/error.hpp"
#include "lqrac/moments.hpp"
#include "lqrac/simulator.hpp"
#include "lqrac/theory.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace lqrac::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::ConfigError, what); }

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) config_error(where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (allowed.count(key) == 0) config_error("unknown key '" + key + "' in " + where);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) config_error(where + " must be a number");
    return v.get<double>();
}

long integer(const json& v, const std::string& where) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) config_error(where + " must be an integer");
    return v.get<long>();
}

bool boolean(const json& v, const std::string& where) {
    if (!v.is_boolean()) config_error(where + " must be true or false");
    return v.get<bool>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) config_error(where + " must be a string");
    return v.get<std::string>();
}

Matrix matrix(const json& v, const std::string& where) {
    if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
    if (!v.is_array() || v.empty()) config_error(where + " must be a number or a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    if (!v[0].is_array() || v[0].empty()) config_error(where + " rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(v[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = v[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            config_error(where + " rows must all have the same length");
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)], where);
    }
    return m;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

// Non-finite values become strings so that the document stays valid JSON.
json num_json(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

std::string matrix_text(const Matrix& m) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out += i ? ",[" : "[";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += ']';
    }
    return out + "]";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void parse_system(const json& s, RunConfig& cfg) {
    check_keys(s, "system", {"A", "B", "Q", "R", "Psi", "sigma", "sigma2"});
    for (const char* key : {"A", "B", "Q", "R", "Psi"})
        if (!s.contains(key)) config_error(std::string("system.") + key + " is required");
    cfg.a = matrix(s["A"], "system.A");
    cfg.b = matrix(s["B"], "system.B");
    cfg.q = matrix(s["Q"], "system.Q");
    cfg.r = matrix(s["R"], "system.R");
    cfg.psi = matrix(s["Psi"], "system.Psi");
    if (s.contains("sigma") && s.contains("sigma2")) config_error("give system.sigma or system.sigma2, not both");
    if (s.contains("sigma")) {
        const double sd = number(s["sigma"], "system.sigma");
        if (!(sd > 0.0)) config_error("system.sigma must be positive");
        cfg.sigma2 = sd * sd;
    } else if (s.contains("sigma2")) {
        cfg.sigma2 = number(s["sigma2"], "system.sigma2");
    } else {
        config_error("system.sigma or system.sigma2 is required");
    }
}

void parse_critic(const json& c, RunConfig& cfg) {
    check_keys(c, "critic",
               {"epochs", "iterations", "first_iterations", "tau", "delta", "D0", "noise", "sigma_x", "sigma_y",
                "h_norm", "warm_start", "restart_per_policy", "next_action", "max_samples"});
    CriticSettings& cs = cfg.actor.critic;
    EpochConfig& ec = cs.epochs;
    if (c.contains("epochs")) ec.epochs = integer(c["epochs"], "critic.epochs");
    if (c.contains("iterations")) {
        const json& it = c["iterations"];
        if (it.is_string()) {
            if (it.get<std::string>() != "theory") config_error("critic.iterations must be a list or \"theory\"");
            ec.mode = BudgetMode::Theory;
            ec.iterations.clear();
        } else if (it.is_array()) {
            ec.mode = BudgetMode::Practical;
            ec.iterations.clear();
            for (const auto& v : it) ec.iterations.push_back(integer(v, "critic.iterations"));
            if (ec.iterations.empty()) config_error("critic.iterations must not be empty");
        } else {
            ec.mode = BudgetMode::Practical;
            ec.iterations = {integer(it, "critic.iterations")};
        }
    }
    if (c.contains("first_iterations")) {
        const json& f = c["first_iterations"];
        if (f.is_null()) {
            cs.first_epochs.reset();
        } else {
            EpochConfig first;
            first.epochs = 1;
            first.iterations = {integer(f, "critic.first_iterations")};
            cs.first_epochs = first;
        }
    }
    if (c.contains("tau")) ec.tau = integer(c["tau"], "critic.tau");
    if (c.contains("delta")) ec.theory.delta = number(c["delta"], "critic.delta");
    if (c.contains("D0")) {
        if (c["D0"].is_string()) {
            if (c["D0"].get<std::string>() != "auto") config_error("critic.D0 must be a number or \"auto\"");
            cfg.d0.reset();
        } else {
            cfg.d0 = number(c["D0"], "critic.D0");
        }
    }
    if (c.contains("noise")) {
        const std::string n = text(c["noise"], "critic.noise");
        if (n == "fixed") cfg.noise = NoiseSource::Fixed;
        else if (n == "theory") cfg.noise = NoiseSource::Theory;
        else config_error("critic.noise must be \"fixed\" or \"theory\"");
    }
    if (c.contains("sigma_x")) ec.sigma_x = number(c["sigma_x"], "critic.sigma_x");
    if (c.contains("sigma_y")) ec.sigma_y = number(c["sigma_y"], "critic.sigma_y");
    if (c.contains("h_norm")) {
        const json& h = c["h_norm"];
        if (h.is_string()) {
            const std::string v = h.get<std::string>();
            if (v == "exact") cs.h_norm_source = HNormSource::Exact;
            else if (v == "bound") cs.h_norm_source = HNormSource::Bound;
            else config_error("critic.h_norm must be \"exact\", \"bound\" or a number");
        } else {
            cs.h_norm_source = HNormSource::Fixed;
            ec.h_norm = number(h, "critic.h_norm");
        }
    }
    if (c.contains("warm_start")) cs.warm_start = boolean(c["warm_start"], "critic.warm_start");
    if (c.contains("restart_per_policy"))
        cs.restart_per_policy = boolean(c["restart_per_policy"], "critic.restart_per_policy");
    if (c.contains("next_action")) {
        const std::string v = text(c["next_action"], "critic.next_action");
        if (v == "sampled") cs.next = NextAction::Sampled;
        else if (v == "greedy") cs.next = NextAction::Greedy;
        else config_error("critic.next_action must be \"sampled\" or \"greedy\"");
    }
    if (c.contains("max_samples")) ec.max_samples = integer(c["max_samples"], "critic.max_samples");
}

GradientMode parse_mode(const std::string& v, const std::string& where) {
    if (v == "oracle") return GradientMode::Oracle;
    if (v == "critic") return GradientMode::Critic;
    config_error(where + " must be \"oracle\" or \"critic\"");
}

const char* mode_name(GradientMode m) { return m == GradientMode::Oracle ? "oracle" : "critic"; }

void validate(const RunConfig& cfg) {
    const ActorConfig& a = cfg.actor;
    const EpochConfig& ec = a.critic.epochs;
    if (a.eta && !(*a.eta > 0.0)) config_error("actor.eta must be positive");
    if (a.T < 0) config_error("actor.T must be non-negative");
    if (!(a.epsilon > 0.0)) config_error("actor.epsilon must be positive");
    if (ec.epochs < 1) config_error("critic.epochs must be at least 1");
    for (long k : ec.iterations)
        if (k < 0) config_error("critic.iterations entries must be non-negative");
    if (a.critic.first_epochs && a.critic.first_epochs->iterations.front() < 0)
        config_error("critic.first_iterations must be non-negative");
    if (ec.tau < 1) config_error("critic.tau must be at least 1");
    if (!(ec.theory.delta > 0.0 && ec.theory.delta < 1.0)) config_error("critic.delta must lie in (0, 1)");
    if (cfg.d0 && !(*cfg.d0 > 0.0)) config_error("critic.D0 must be positive");
    if (!(ec.sigma_x >= 0.0) || !(ec.sigma_y >= 0.0)) config_error("critic.sigma_x and sigma_y must be non-negative");
    if (ec.max_samples < 0) config_error("critic.max_samples must be non-negative");
    if (!(cfg.delta_star > 0.0 && cfg.delta_star < 1.0)) config_error("delta_star must lie in (0, 1)");
    if (cfg.seeds.empty()) config_error("at least one seed is required");
    if (cfg.k0.rows() != cfg.b.cols() || cfg.k0.cols() != cfg.a.rows())
        config_error("K0 must be k x n to match B and A");
    if (cfg.evaluate_k && (cfg.evaluate_k->rows() != cfg.k0.rows() || cfg.evaluate_k->cols() != cfg.k0.cols()))
        config_error("evaluate.K must have the shape of K0");
}

// Critic settings with the radius, the noise levels and the budget constants resolved for this system.
ActorConfig resolved_actor(const RunConfig& cfg, const LinearSystem& sys, const Policy& k0) {
    ActorConfig a = cfg.actor;
    EpochConfig& ec = a.critic.epochs;
    ec.d0 = cfg.d0 ? *cfg.d0 : bias_constants(sys, k0, 0.0, 0.5).r_star;
    if (cfg.noise == NoiseSource::Theory) {
        ReportOptions ro;
        ro.empirical_samples = 0;
        const ConstantsReport rep = full_report(sys, k0, optimum(sys), a.epsilon, cfg.delta_star, ro);
        ec.sigma_x = rep.sigma_x;
        ec.sigma_y = rep.sigma_y;
    }
    if (a.critic.first_epochs) {
        EpochConfig& f = *a.critic.first_epochs;
        const long k = f.iterations.front();
        f = ec;
        f.epochs = 1;
        f.mode = BudgetMode::Practical;
        f.iterations = {k};
    }
    return a;
}

Policy initial_policy(const RunConfig& cfg, const LinearSystem& sys) {
    Policy k0(sys, cfg.k0);
    if (!k0.stable()) {
        std::ostringstream os;
        os << "K0 has rho(A - BK) = " << k0.rho();
        fail(ErrorCode::UnstableInitialPolicy, os.str());
    }
    return k0;
}

SeedRecord run_seed(const LinearSystem& sys, const Policy& k0, const ActorConfig& actor,
                    std::uint64_t seed, const std::string& hash) {
    SeedRecord rec;
    rec.seed = seed;
    rec.config_hash = hash;
    try {
        TrainResult res = train(sys, k0, actor, seed);
        rec.rows = std::move(res.trace.rows);
        if (res.trace.diverged) rec.diverged = one_line(res.trace.failure.empty() ? "diverged" : res.trace.failure);
        rec.flagged = res.trace.flagged;
    } catch (const std::exception& e) {
        rec.failure = one_line(e.what());
        rec.rows.clear();
    }
    return rec;
}

std::string record_name(std::size_t index, std::uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "seed_%03zu_%llu.csv", index, static_cast<unsigned long long>(seed));
    return buf;
}

json record_json(const SeedRecord& rec) {
    json rows = json::array();
    for (const ActorRow& r : rec.rows)
        rows.push_back({{"t", r.t},
                        {"J", num_json(r.j)},
                        {"err", num_json(r.err)},
                        {"rho", num_json(r.rho)},
                        {"delta_norm", num_json(r.delta_norm)},
                        {"samples", r.samples}});
    json out = {{"schema", kRecordSchema}, {"config_hash", rec.config_hash}, {"seed", rec.seed}, {"rows", rows}};
    if (!rec.failure.empty()) out["failure"] = rec.failure;
    if (!rec.diverged.empty()) out["diverged"] = rec.diverged;
    if (!rec.flagged.empty()) out["flagged"] = rec.flagged;
    return out;
}

std::string summary_text(const std::vector<SeedRecord>& records, const std::vector<AggregateRow>& iter) {
    std::size_t failed = 0, diverged = 0;
    for (const auto& r : records) {
        if (!r.failure.empty()) ++failed;
        if (!r.diverged.empty()) ++diverged;
    }
    std::ostringstream os;
    os << "seeds=" << records.size() << '\n' << "failed=" << failed << '\n' << "diverged=" << diverged << '\n';
    if (!iter.empty()) {
        os << "median_err_first=" << format_double(iter.front().median) << '\n';
        os << "median_err_last=" << format_double(iter.back().median) << '\n';
        os << "p10_err_last=" << format_double(iter.back().p10) << '\n';
        os << "p90_err_last=" << format_double(iter.back().p90) << '\n';
    }
    for (const auto& r : records) {
        if (!r.failure.empty()) os << "failed seed=" << r.seed << ": " << r.failure << '\n';
        if (!r.diverged.empty()) os << "diverged seed=" << r.seed << ": " << r.diverged << '\n';
    }
    return os.str();
}

std::string write_aggregates(const fs::path& dir, const std::vector<SeedRecord>& records) {
    const std::vector<AggregateRow> iter = aggregate(records, Axis::Iteration);
    const std::vector<AggregateRow> samp = aggregate(records, Axis::Samples);
    write_file(dir / "aggregate_iter.csv", aggregate_csv(records, Axis::Iteration));
    write_file(dir / "aggregate_samples.csv", aggregate_csv(records, Axis::Samples));
    write_file(dir / "figure_iter.svg", figure_svg(iter, Axis::Iteration, "|J(K_t) - J(K*)| by iteration"));
    write_file(dir / "figure_samples.svg", figure_svg(samp, Axis::Samples, "|J(K_t) - J(K*)| by samples"));
    const std::string summary = summary_text(records, iter);
    write_file(dir / "summary.txt", summary);
    return summary;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

LinearSystem RunConfig::system() const { return LinearSystem(a, b, q, r, psi, sigma2); }

std::string RunConfig::echo() const {
    json critic = {{"epochs", actor.critic.epochs.epochs},
                   {"tau", actor.critic.epochs.tau},
                   {"delta", actor.critic.epochs.theory.delta},
                   {"noise", noise == NoiseSource::Theory ? "theory" : "fixed"},
                   {"sigma_x", actor.critic.epochs.sigma_x},
                   {"sigma_y", actor.critic.epochs.sigma_y},
                   {"warm_start", actor.critic.warm_start},
                   {"restart_per_policy", actor.critic.restart_per_policy},
                   {"next_action", actor.critic.next == NextAction::Sampled ? "sampled" : "greedy"},
                   {"max_samples", actor.critic.epochs.max_samples}};
    if (actor.critic.epochs.mode == BudgetMode::Theory) critic["iterations"] = "theory";
    else critic["iterations"] = actor.critic.epochs.iterations;
    critic["first_iterations"] =
        actor.critic.first_epochs ? json(actor.critic.first_epochs->iterations.front()) : json(nullptr);
    critic["D0"] = d0 ? json(*d0) : json("auto");
    switch (actor.critic.h_norm_source) {
    case HNormSource::Exact: critic["h_norm"] = "exact"; break;
    case HNormSource::Bound: critic["h_norm"] = "bound"; break;
    case HNormSource::Fixed: critic["h_norm"] = actor.critic.epochs.h_norm; break;
    }
    json doc = {
        {"system",
         {{"A", matrix_json(a)},
          {"B", matrix_json(b)},
          {"Q", matrix_json(q)},
          {"R", matrix_json(r)},
          {"Psi", matrix_json(psi)},
          {"sigma2", sigma2}}},
        {"K0", matrix_json(k0)},
        {"actor",
         {{"eta", actor.eta ? json(*actor.eta) : json("auto")},
          {"T", actor.T},
          {"epsilon", actor.epsilon},
          {"mode", mode_name(actor.mode)},
          {"guards", actor.guards_enabled}}},
        {"critic", critic},
        {"delta_star", delta_star},
        {"seeds", seeds},
        {"oracle_diagnostics", actor.oracle_diagnostics},
        {"evaluate", {{"K", evaluate_k ? matrix_json(*evaluate_k) : json(nullptr)}, {"mode", mode_name(evaluate_mode)}}},
        {"output", output},
        {"format", format == OutputFormat::Json ? "json" : "csv"},
        {"threads", threads},
    };
    return doc.dump(2) + "\n";
}

std::uint64_t RunConfig::hash() const {
    // Where the files go and how many workers write them does not change their content.
    json doc = json::parse(echo());
    doc.erase("output");
    doc.erase("threads");
    doc.erase("format");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : doc.dump(2)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint64_t> seeds_from_master(std::uint64_t master, std::size_t count) {
    std::vector<std::uint64_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = derive_seed(master, i);
    return out;
}

RunConfig default_config() {
    RunConfig cfg;
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    cfg.a = one;
    cfg.b = one;
    cfg.q = 100.0 * one;
    cfg.r = 100.0 * one;
    cfg.psi = 0.01 * one;
    cfg.sigma2 = 0.01;
    cfg.k0 = one;

    cfg.actor.T = 50;
    cfg.actor.epsilon = 1e-3;
    cfg.actor.mode = GradientMode::Critic;
    cfg.actor.guards_enabled = true;
    cfg.actor.oracle_diagnostics = true;

    CriticSettings& cs = cfg.actor.critic;
    cs.epochs.epochs = 3;
    cs.epochs.iterations = {2000};
    cs.epochs.tau = 3;
    cs.epochs.theory.delta = 0.01;
    cs.epochs.sigma_x = 0.0;
    cs.epochs.sigma_y = 0.0;
    EpochConfig first = cs.epochs;
    first.epochs = 1;
    first.iterations = {200000};
    cs.first_epochs = first;
    cs.h_norm_source = HNormSource::Exact;

    cfg.seeds = seeds_from_master(2024, 20);
    cfg.output = "lqrac_out";
    return cfg;
}

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        config_error(std::string("malformed JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"system", "system_file", "K0", "actor", "critic", "delta_star", "seeds", "oracle_diagnostics",
                "evaluate", "output", "format", "threads"});
    RunConfig cfg = default_config();
    try {
        if (doc.contains("system") && doc.contains("system_file")) config_error("give system or system_file, not both");
        if (doc.contains("system")) parse_system(doc["system"], cfg);
        if (doc.contains("system_file")) {
            fs::path p = text(doc["system_file"], "system_file");
            if (p.is_relative()) p = fs::path(base_dir) / p;
            json s;
            try {
                s = json::parse(read_file(p.string()));
            } catch (const json::exception& e) {
                config_error("malformed system file " + p.string() + ": " + e.what());
            }
            parse_system(s, cfg);
        }
        if (doc.contains("K0")) cfg.k0 = matrix(doc["K0"], "K0");
        if (doc.contains("actor")) {
            const json& a = doc["actor"];
            check_keys(a, "actor", {"eta", "T", "epsilon", "mode", "guards"});
            if (a.contains("eta")) {
                if (a["eta"].is_string()) {
                    if (a["eta"].get<std::string>() != "auto") config_error("actor.eta must be a number or \"auto\"");
                    cfg.actor.eta.reset();
                } else {
                    cfg.actor.eta = number(a["eta"], "actor.eta");
                }
            }
            if (a.contains("T")) cfg.actor.T = integer(a["T"], "actor.T");
            if (a.contains("epsilon")) cfg.actor.epsilon = number(a["epsilon"], "actor.epsilon");
            if (a.contains("mode")) cfg.actor.mode = parse_mode(text(a["mode"], "actor.mode"), "actor.mode");
            if (a.contains("guards")) cfg.actor.guards_enabled = boolean(a["guards"], "actor.guards");
        }
        if (doc.contains("critic")) parse_critic(doc["critic"], cfg);
        if (doc.contains("delta_star")) cfg.delta_star = number(doc["delta_star"], "delta_star");
        if (doc.contains("seeds")) {
            const json& s = doc["seeds"];
            cfg.seeds.clear();
            if (s.is_array()) {
                for (const auto& v : s) {
                    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                        config_error("seeds entries must be non-negative integers");
                    cfg.seeds.push_back(v.get<std::uint64_t>());
                }
            } else {
                check_keys(s, "seeds", {"master", "count"});
                if (!s.contains("master") || !s.contains("count")) config_error("seeds needs master and count");
                const long count = integer(s["count"], "seeds.count");
                if (count < 1) config_error("seeds.count must be at least 1");
                const long master = integer(s["master"], "seeds.master");
                if (master < 0) config_error("seeds.master must be non-negative");
                cfg.seeds = seeds_from_master(static_cast<std::uint64_t>(master), static_cast<std::size_t>(count));
            }
        }
        if (doc.contains("oracle_diagnostics"))
            cfg.actor.oracle_diagnostics = boolean(doc["oracle_diagnostics"], "oracle_diagnostics");
        if (doc.contains("evaluate")) {
            const json& e = doc["evaluate"];
            check_keys(e, "evaluate", {"K", "mode"});
            if (e.contains("K") && !e["K"].is_null()) cfg.evaluate_k = matrix(e["K"], "evaluate.K");
            if (e.contains("mode")) cfg.evaluate_mode = parse_mode(text(e["mode"], "evaluate.mode"), "evaluate.mode");
        }
        if (doc.contains("output")) cfg.output = text(doc["output"], "output");
        if (doc.contains("format")) {
            const std::string f = text(doc["format"], "format");
            if (f == "csv") cfg.format = OutputFormat::Csv;
            else if (f == "json") cfg.format = OutputFormat::Json;
            else config_error("format must be \"csv\" or \"json\"");
        }
        if (doc.contains("threads")) {
            const long t = integer(doc["threads"], "threads");
            if (t < 0) config_error("threads must be non-negative");
            cfg.threads = static_cast<unsigned>(t);
        }
    } catch (const json::exception& e) {
        config_error(e.what());
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    const fs::path p(path);
    return parse_config(read_file(path), p.has_parent_path() ? p.parent_path().string() : std::string("."));
}

std::string cmd_solve(const RunConfig& cfg) {
    const LinearSystem sys = cfg.system();
    const Optimum opt = optimum(sys);
    const Policy k0 = initial_policy(cfg, sys);
    ReportOptions ro;
    ro.seed = cfg.seeds.front();
    const ConstantsReport rep = full_report(sys, k0, opt, cfg.actor.epsilon, cfg.delta_star, ro);
    if (cfg.format == OutputFormat::Json) {
        json doc = {{"P", matrix_json(opt.riccati.p)},
                    {"K", matrix_json(opt.riccati.k)},
                    {"J", opt.quantities.j},
                    {"riccati_residual", opt.riccati.residual}};
        json constants = json::object();
        std::istringstream in(rep.to_text());
        for (std::string line; std::getline(in, line);) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            constants[line.substr(0, eq)] = num_json(std::strtod(line.c_str() + eq + 1, nullptr));
        }
        doc["constants"] = constants;
        return doc.dump(2) + "\n";
    }
    std::ostringstream os;
    os << "P=" << matrix_text(opt.riccati.p) << '\n';
    os << "K=" << matrix_text(opt.riccati.k) << '\n';
    os << "J=" << format_double(opt.quantities.j) << '\n';
    os << "riccati_residual=" << format_double(opt.riccati.residual) << '\n';
    os << rep.to_text();
    return os.str();
}

std::string cmd_constants(const RunConfig& cfg) {
    const LinearSystem sys = cfg.system();
    const Optimum opt = optimum(sys);
    const Policy k0 = initial_policy(cfg, sys);
    ReportOptions ro;
    ro.seed = cfg.seeds.front();
    const std::string report = full_report(sys, k0, opt, cfg.actor.epsilon, cfg.delta_star, ro).to_text();
    if (!cfg.output.empty()) {
        ensure_dir(cfg.output);
        write_file(fs::path(cfg.output) / "constants.txt", report);
    }
    return report;
}

std::string cmd_evaluate(const RunConfig& cfg) {
    const LinearSystem sys = cfg.system();
    const Policy k(sys, cfg.evaluate_k ? *cfg.evaluate_k : cfg.k0);
    if (!k.stable()) {
        std::ostringstream os;
        os << "policy has rho(A - BK) = " << k.rho();
        fail(ErrorCode::UnstablePolicy, os.str());
    }
    const PolicyQuantities pq = policy_quantities(sys, k);
    const BellmanSystem exact = exact_bellman_system(sys, k, cfg.actor.critic.next);
    const ActorConfig actor = resolved_actor(cfg, sys, k);
    EpochConfig ec = actor.critic.epochs;
    Eigen::JacobiSVD<Matrix> svd(exact.h);
    switch (actor.critic.h_norm_source) {
    case HNormSource::Exact: ec.h_norm = svd.singularValues()(0); break;
    case HNormSource::Bound: ec.h_norm = bias_constants(sys, k, 0.0, 0.5).l_h; break;
    case HNormSource::Fixed: break;
    }
    ec.theory.mu = svd.singularValues()(svd.singularValues().size() - 1);

    std::ostringstream trace;
    trace << "epoch,t,gap,samples\n";
    long epoch = 1;
    long last_t = 0;
    const TraceSink sink = [&](const TraceRow& row) {
        if (row.t <= last_t) ++epoch;
        last_t = row.t;
        if (row.t <= 100 || row.t % 1000 == 0)
            trace << epoch << ',' << row.t << ',' << format_double(row.gap) << ',' << row.samples << '\n';
    };

    const Vector p0 = actor.critic.initial_guess.size() == sys.unknown_dim() ? actor.critic.initial_guess
                                                                             : Vector::Zero(sys.unknown_dim());
    MultiEpochResult res;
    if (cfg.evaluate_mode == GradientMode::Oracle) {
        ExactOracle oracle(exact);
        res = multi_epoch_run(oracle, p0, ec, &exact, &pq.vartheta, cfg.output.empty() ? TraceSink{} : sink);
    } else {
        TrajectoryState state = initial_state(sys, k, derive_seed(cfg.seeds.front(), 0));
        MarkovOracle oracle(sys, k, state, ec.tau, actor.critic.next);
        res = multi_epoch_run(oracle, p0, ec, &exact, &pq.vartheta, cfg.output.empty() ? TraceSink{} : sink);
    }
    const Matrix e_hat = extract_natural_gradient(res.p, k, sys.n(), sys.k());
    const double err = (res.p - pq.vartheta).norm();
    const double e_err = (e_hat - pq.e).norm();

    std::ostringstream table;
    table << "epoch,radius,iterations,samples,gap,error_sq,halving_bound_sq\n";
    for (const EpochRecord& r : res.epochs)
        table << r.epoch << ',' << format_double(r.radius) << ',' << r.iterations << ',' << r.samples << ','
              << format_double(r.gap) << ',' << format_double(r.error_sq) << ','
              << format_double(std::ldexp(ec.d0 * ec.d0, static_cast<int>(-r.epoch))) << '\n';

    if (!cfg.output.empty()) {
        ensure_dir(cfg.output);
        write_file(fs::path(cfg.output) / "evaluate_epochs.csv", table.str());
        write_file(fs::path(cfg.output) / "evaluate_trace.csv", trace.str());
    }

    if (cfg.format == OutputFormat::Json) {
        json epochs = json::array();
        for (const EpochRecord& r : res.epochs)
            epochs.push_back({{"epoch", r.epoch},
                              {"radius", r.radius},
                              {"iterations", r.iterations},
                              {"samples", r.samples},
                              {"gap", num_json(r.gap)},
                              {"error_sq", num_json(r.error_sq)}});
        json doc = {{"K", matrix_json(k.k())},
                    {"mode", mode_name(cfg.evaluate_mode)},
                    {"D0", ec.d0},
                    {"h_norm", ec.h_norm},
                    {"estimate_error", num_json(err)},
                    {"natural_gradient_error", num_json(e_err)},
                    {"natural_gradient_norm", pq.e.norm()},
                    {"samples", res.samples},
                    {"epochs", epochs}};
        return doc.dump(2) + "\n";
    }
    std::ostringstream os;
    os << "K=" << matrix_text(k.k()) << '\n';
    os << "mode=" << mode_name(cfg.evaluate_mode) << '\n';
    os << "D0=" << format_double(ec.d0) << '\n';
    os << "h_norm=" << format_double(ec.h_norm) << '\n';
    os << "estimate_error=" << format_double(err) << '\n';
    os << "natural_gradient_error=" << format_double(e_err) << '\n';
    os << "natural_gradient_norm=" << format_double(pq.e.norm()) << '\n';
    os << "samples=" << res.samples << '\n';
    os << table.str();
    return os.str();
}

std::string cmd_train(const RunConfig& cfg) {
    const LinearSystem sys = cfg.system();
    const Policy k0 = initial_policy(cfg, sys);
    const ActorConfig actor = resolved_actor(cfg, sys, k0);
    const std::string hash = hex64(cfg.hash());
    const std::uint64_t seed = cfg.seeds.front();
    TrainResult res = train(sys, k0, actor, seed);
    SeedRecord rec;
    rec.seed = seed;
    rec.config_hash = hash;
    rec.rows = res.trace.rows;
    if (res.trace.diverged) rec.diverged = one_line(res.trace.failure.empty() ? "diverged" : res.trace.failure);
    rec.flagged = res.trace.flagged;
    const std::string csv = record_csv(rec);
    if (!cfg.output.empty()) {
        ensure_dir(cfg.output);
        write_file(fs::path(cfg.output) / record_name(0, seed), csv);
        write_file(fs::path(cfg.output) / "config.json", cfg.echo());
    }
    if (cfg.format == OutputFormat::Json) {
        json doc = record_json(rec);
        doc["K_final"] = matrix_json(res.policy.k());
        doc["eta"] = res.trace.eta;
        doc["warnings"] = res.trace.warnings;
        return doc.dump(2) + "\n";
    }
    return csv;
}

std::string cmd_experiment(const RunConfig& cfg) {
    if (cfg.output.empty()) config_error("experiment needs an output directory");
    const LinearSystem sys = cfg.system();
    const Policy k0 = initial_policy(cfg, sys);
    const ActorConfig actor = resolved_actor(cfg, sys, k0);
    const std::string hash = hex64(cfg.hash());

    std::vector<SeedRecord> records(cfg.seeds.size());
    unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.seeds.size()));
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++)
            records[i] = run_seed(sys, k0, actor, cfg.seeds[i], hash);
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    const fs::path dir(cfg.output);
    ensure_dir(cfg.output);
    write_file(dir / "config.json", cfg.echo());
    ReportOptions ro;
    ro.empirical_samples = 0;
    write_file(dir / "constants.txt", full_report(sys, k0, optimum(sys), cfg.actor.epsilon, cfg.delta_star, ro).to_text());
    for (std::size_t i = 0; i < records.size(); ++i) write_file(dir / record_name(i, records[i].seed), record_csv(records[i]));
    const std::string summary = write_aggregates(dir, records);
    if (cfg.format == OutputFormat::Json) {
        json doc = {{"output", cfg.output}, {"config_hash", hash}, {"summary", summary}};
        return doc.dump(2) + "\n";
    }
    return "output=" + cfg.output + "\nconfig_hash=" + hash + "\n" + summary;
}

std::string record_csv(const SeedRecord& rec) {
    std::ostringstream os;
    os << "# " << kRecordSchema << '\n';
    os << "# config_hash=" << rec.config_hash << " seed=" << rec.seed << '\n';
    if (!rec.failure.empty()) os << "# failure: " << rec.failure << '\n';
    if (!rec.diverged.empty()) os << "# diverged: " << rec.diverged << '\n';
    if (!rec.flagged.empty()) {
        os << "# flagged:";
        for (long t : rec.flagged) os << ' ' << t;
        os << '\n';
    }
    os << "t,J,err,rho,delta_norm,samples\n";
    for (const ActorRow& r : rec.rows)
        os << r.t << ',' << format_double(r.j) << ',' << format_double(r.err) << ',' << format_double(r.rho) << ','
           << format_double(r.delta_norm) << ',' << r.samples << '\n';
    return os.str();
}

SeedRecord parse_record_csv(const std::string& text) {
    SeedRecord rec;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != std::string("# ") + kRecordSchema)
        fail(ErrorCode::IoError, "record does not start with the schema line");
    bool header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# config_hash=", 0) == 0) {
            const auto sp = line.find(" seed=");
            if (sp == std::string::npos) fail(ErrorCode::IoError, "bad record identity line");
            rec.config_hash = line.substr(14, sp - 14);
            rec.seed = std::strtoull(line.c_str() + sp + 6, nullptr, 10);
        } else if (line.rfind("# failure: ", 0) == 0) {
            rec.failure = line.substr(11);
        } else if (line.rfind("# diverged: ", 0) == 0) {
            rec.diverged = line.substr(12);
        } else if (line.rfind("# flagged:", 0) == 0) {
            std::istringstream fs(line.substr(10));
            for (long t; fs >> t;) rec.flagged.push_back(t);
        } else if (line == "t,J,err,rho,delta_norm,samples") {
            header = true;
        } else if (!line.empty()) {
            if (!header) fail(ErrorCode::IoError, "record row before the header");
            ActorRow r;
            std::istringstream ls(line);
            std::string f[6];
            for (auto& field : f)
                if (!std::getline(ls, field, ',')) fail(ErrorCode::IoError, "record row has fewer than 6 fields");
            r.t = std::strtol(f[0].c_str(), nullptr, 10);
            r.j = std::strtod(f[1].c_str(), nullptr);
            r.err = std::strtod(f[2].c_str(), nullptr);
            r.rho = std::strtod(f[3].c_str(), nullptr);
            r.delta_norm = std::strtod(f[4].c_str(), nullptr);
            r.samples = std::strtol(f[5].c_str(), nullptr, 10);
            r.censored = std::isinf(r.j);
            rec.rows.push_back(r);
        }
    }
    if (!header) fail(ErrorCode::IoError, "record has no header row");
    return rec;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double a = values[lo];
    const double b = values[hi];
    if (frac == 0.0 || a == b) return a;
    return a + (b - a) * frac;
}

std::vector<AggregateRow> aggregate(const std::vector<SeedRecord>& records, Axis axis) {
    std::size_t len = std::numeric_limits<std::size_t>::max();
    bool any = false;
    for (const auto& r : records) {
        if (!r.failure.empty() || r.rows.empty()) continue;
        len = std::min(len, r.rows.size());
        any = true;
    }
    std::vector<AggregateRow> out;
    if (!any) return out;
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> err, samples;
        for (const auto& r : records) {
            if (!r.failure.empty() || r.rows.empty()) continue;
            const double e = r.rows[t].err;
            err.push_back(std::isnan(e) ? kInf : std::abs(e));
            samples.push_back(static_cast<double>(r.rows[t].samples));
        }
        AggregateRow row;
        row.x = axis == Axis::Iteration ? static_cast<double>(t) : percentile(samples, 50.0);
        row.median = percentile(err, 50.0);
        row.p10 = percentile(err, 10.0);
        row.p90 = percentile(err, 90.0);
        out.push_back(row);
    }
    return out;
}

std::string aggregate_csv(const std::vector<SeedRecord>& records, Axis axis) {
    std::size_t used = 0;
    for (const auto& r : records)
        if (r.failure.empty() && !r.rows.empty()) ++used;
    std::ostringstream os;
    os << "# " << kAggregateSchema << '\n';
    os << "# axis=" << (axis == Axis::Iteration ? "iteration" : "samples") << " seeds=" << records.size()
       << " used=" << used << " y=|J(K_t)-J(K*)|\n";
    for (const auto& r : records) {
        if (!r.failure.empty()) os << "# failed seed=" << r.seed << ": " << r.failure << '\n';
        if (!r.diverged.empty()) os << "# diverged seed=" << r.seed << ": " << r.diverged << '\n';
    }
    os << "x,median,p10,p90\n";
    for (const AggregateRow& row : aggregate(records, axis))
        os << format_double(row.x) << ',' << format_double(row.median) << ',' << format_double(row.p10) << ','
           << format_double(row.p90) << '\n';
    return os.str();
}

std::string figure_svg(const std::vector<AggregateRow>& rows, Axis axis, const std::string& title) {
    constexpr double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
    double lo = kInf, hi = -kInf, xmax = 0.0;
    for (const auto& r : rows) {
        for (double v : {r.median, r.p10, r.p90}) {
            if (std::isfinite(v) && v > 0.0) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (std::isfinite(r.x)) xmax = std::max(xmax, r.x);
    }
    if (!(lo < kInf)) {
        lo = 1e-3;
        hi = 1.0;
    }
    double dlo = std::floor(std::log10(lo));
    double dhi = std::ceil(std::log10(hi));
    if (dhi <= dlo) dhi = dlo + 1.0;
    if (xmax <= 0.0) xmax = 1.0;

    const auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
    const auto py = [&](double v) {
        double lv = (std::isfinite(v) && v > 0.0) ? std::log10(v) : (v > 0.0 ? dhi : dlo);
        lv = std::clamp(lv, dlo, dhi);
        return T + (H - T - B) * (dhi - lv) / (dhi - dlo);
    };
    const auto coord = [](double x, double y) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", x, y);
        return std::string(buf);
    };
    std::string esc;
    for (char c : title) {
        if (c == '<') esc += "&lt;";
        else if (c == '>') esc += "&gt;";
        else if (c == '&') esc += "&amp;";
        else esc += c;
    }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << esc << "</text>\n";
    os << "<g stroke=\"#ccc\" stroke-width=\"0.5\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (double d = dlo; d <= dhi; d += 1.0) {
        const double y = py(std::pow(10.0, d));
        os << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y << "\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" stroke=\"none\">1e"
           << static_cast<int>(d) << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmax * i / 5.0;
        const double x = px(xv);
        char label[32];
        std::snprintf(label, sizeof label, "%.3g", xv);
        os << "<line x1=\"" << x << "\" y1=\"" << T << "\" x2=\"" << x << "\" y2=\"" << H - B << "\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" stroke=\"none\">" << label
           << "</text>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    if (!rows.empty()) {
        os << "<polygon fill=\"#4a7ebb\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
        for (const auto& r : rows) os << coord(px(r.x), py(r.p90)) << ' ';
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) os << coord(px(it->x), py(it->p10)) << ' ';
        os << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"#1f4e8c\" stroke-width=\"2\" points=\"";
        for (const auto& r : rows) os << coord(px(r.x), py(r.median)) << ' ';
        os << "\"/>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
       << (axis == Axis::Iteration ? "iteration t" : "cumulative samples") << "</text>\n";
    os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 18 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">median and 10-90 percentile</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string reaggregate(const std::string& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("seed_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    if (ec) fail(ErrorCode::IoError, "cannot list " + dir + ": " + ec.message());
    if (files.empty()) fail(ErrorCode::IoError, "no seed records in " + dir);
    std::sort(files.begin(), files.end());
    std::vector<SeedRecord> records;
    for (const auto& f : files) records.push_back(parse_record_csv(read_file(f.string())));
    return write_aggregates(fs::path(dir), records);
}

} // namespace lqrac::harness
