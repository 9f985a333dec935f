#include "lqrac.h"

#include "CLI11.hpp"

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::uint64_t> seeds;
    std::string out;
    bool oracle_diagnostics = false;
    bool no_oracle_diagnostics = false;
    std::string mode;
    std::string format;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "JSON run configuration (built-in defaults when omitted)");
    auto* seed = cmd->add_option("--seed", o.seed, "single seed, replaces the configured seeds");
    cmd->add_option("--seeds", o.seeds, "seed list, replaces the configured seeds")->delimiter(',')->excludes(seed);
    cmd->add_option("--out", o.out, "output directory");
    auto* on = cmd->add_flag("--oracle-diagnostics", o.oracle_diagnostics, "record ||E_hat - E|| per iteration");
    cmd->add_flag("--no-oracle-diagnostics", o.no_oracle_diagnostics, "skip the exact-gradient comparison")
        ->excludes(on);
    cmd->add_option("--mode", o.mode, "gradient source")->check(CLI::IsMember({"oracle", "critic"}));
    cmd->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

int report(lqrac_status st) {
    std::cerr << "lqrac: " << lqrac_last_error() << '\n';
    return static_cast<int>(st);
}

int run(const std::string& name, const Options& o) {
    lqrac_config* cfg = nullptr;
    lqrac_status st = o.config.empty() ? lqrac_config_default(&cfg) : lqrac_config_load(o.config.c_str(), &cfg);
    if (st != LQRAC_OK) return report(st);

    const auto apply = [&]() -> lqrac_status {
        lqrac_status s = LQRAC_OK;
        if (o.seed) {
            const std::uint64_t one = *o.seed;
            if ((s = lqrac_config_set_seeds(cfg, &one, 1)) != LQRAC_OK) return s;
        } else if (!o.seeds.empty()) {
            if ((s = lqrac_config_set_seeds(cfg, o.seeds.data(), o.seeds.size())) != LQRAC_OK) return s;
        }
        if (!o.out.empty() && (s = lqrac_config_set_output(cfg, o.out.c_str())) != LQRAC_OK) return s;
        if (o.oracle_diagnostics && (s = lqrac_config_set_oracle_diagnostics(cfg, 1)) != LQRAC_OK) return s;
        if (o.no_oracle_diagnostics && (s = lqrac_config_set_oracle_diagnostics(cfg, 0)) != LQRAC_OK) return s;
        if (!o.mode.empty() && (s = lqrac_config_set_mode(cfg, o.mode.c_str())) != LQRAC_OK) return s;
        if (!o.format.empty() && (s = lqrac_config_set_format(cfg, o.format.c_str())) != LQRAC_OK) return s;
        return s;
    };
    st = apply();
    if (st != LQRAC_OK) {
        lqrac_config_free(cfg);
        return report(st);
    }

    char* text = nullptr;
    if (name == "solve") st = lqrac_cmd_solve(cfg, &text);
    else if (name == "constants") st = lqrac_cmd_constants(cfg, &text);
    else if (name == "evaluate") st = lqrac_cmd_evaluate(cfg, &text);
    else if (name == "train") st = lqrac_cmd_train(cfg, &text);
    else if (name == "experiment") st = lqrac_cmd_experiment(cfg, &text);
    else if (name == "config") st = lqrac_config_echo(cfg, &text);
    lqrac_config_free(cfg);
    if (st != LQRAC_OK) return report(st);
    std::fputs(text, stdout);
    lqrac_string_free(text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Actor-critic policy optimization for average-cost linear quadratic control"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lqrac_version()));

    Options opts;
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"solve", "optimal gain, cost and constants report"},
        {"constants", "constants report at K0"},
        {"evaluate", "run the critic for a fixed policy"},
        {"train", "run the actor on the first seed and print its trace"},
        {"experiment", "run every seed, write traces, aggregates and figures"},
        {"config", "print the resolved configuration"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

    std::string agg_dir;
    auto* agg = app.add_subcommand("aggregate", "rebuild aggregates and figures from stored seed records");
    agg->add_option("dir", agg_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (agg->parsed()) {
        char* text = nullptr;
        const lqrac_status st = lqrac_cmd_aggregate(agg_dir.c_str(), &text);
        if (st != LQRAC_OK) return report(st);
        std::fputs(text, stdout);
        lqrac_string_free(text);
        return 0;
    }
    for (const auto& [name, help] : commands)
        if (app.got_subcommand(name)) return run(name, opts);
    return 1;
}
