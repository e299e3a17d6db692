// Command-line harness: run builtin or file-based experiments and sweeps.
#include "opf/harness/config.hpp"
#include "opf/harness/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>
#include <optional>
#include <sstream>

namespace {

struct RunOptions {
    std::optional<int> seeds;
    std::optional<std::uint64_t> base_seed;
    std::optional<std::string> out;
    std::optional<int> workers;
};

void add_run_options(CLI::App* cmd, RunOptions& opts) {
    cmd->add_option("--seeds", opts.seeds, "Number of paired replicates");
    cmd->add_option("--base-seed", opts.base_seed, "Seed of the first replicate");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--workers", opts.workers, "Concurrent replicate workers");
}

void apply(const RunOptions& opts, opf::harness::ExperimentConfig& config) {
    if (opts.seeds) config.seeds = *opts.seeds;
    if (opts.base_seed) config.base_seed = *opts.base_seed;
    if (opts.out) config.out = *opts.out;
    if (opts.workers) config.workers = *opts.workers;
}

int report(const opf::harness::ExperimentResult& result) {
    opf::harness::write_outputs(result, result.config.out);
    int failed = 0;
    for (const auto& r : result.runs) failed += r.ok() ? 0 : 1;
    std::cout << result.config.name << ": " << result.runs.size() << " runs, " << failed << " failed, "
              << "rho(A-LC)=" << result.gamma_auto << ", outputs in " << result.config.out << "\n";
    for (const auto& m : result.config.grid) {
        std::vector<double> finals;
        for (const auto* r : result.runs_for(m.label()))
            if (r->ok()) finals.push_back(r->regret.final_regret());
        if (finals.empty()) continue;
        std::sort(finals.begin(), finals.end());
        std::cout << "  " << m.label() << "  median final regret " << finals[finals.size() / 2] << "\n";
    }
    for (const auto& r : result.runs)
        if (!r.ok()) std::cerr << "  seed " << r.seed << " " << r.label << ": " << r.status << "\n";
    return failed == 0 ? 0 : 3;
}

std::vector<std::string> split_values(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online prediction with forgetting: experiment harness"};
    app.require_subcommand(1);

    RunOptions run_opts;
    std::string run_target;
    auto* run = app.add_subcommand("run", "Run a config file or builtin experiment");
    run->add_option("config", run_target, "Config path or builtin name")->required();
    add_run_options(run, run_opts);

    RunOptions sweep_opts;
    std::string sweep_target, sweep_param, sweep_values;
    auto* sw = app.add_subcommand("sweep", "Sweep gamma, alpha or beta over an experiment's grid");
    sw->add_option("config", sweep_target, "Config path or builtin name")->required();
    sw->add_option("--param", sweep_param, "gamma | alpha | beta")->required();
    sw->add_option("--values", sweep_values, "Comma-separated values, e.g. 0.7,0.8,1.0")->required();
    add_run_options(sw, sweep_opts);

    auto* list = app.add_subcommand("list", "List builtin experiments");

    std::string show_target;
    auto* show = app.add_subcommand("show", "Print the canonical text of a config");
    show->add_option("config", show_target, "Config path or builtin name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*list) {
            for (const auto& name : opf::harness::builtin_names()) std::cout << name << "\n";
            return 0;
        }
        if (*show) {
            std::cout << opf::harness::to_text(opf::harness::load_config(show_target));
            return 0;
        }
        if (*run) {
            auto config = opf::harness::load_config(run_target);
            apply(run_opts, config);
            return report(opf::harness::run_experiment(config));
        }
        auto config = opf::harness::load_config(sweep_target);
        apply(sweep_opts, config);
        return report(opf::harness::sweep(config, sweep_param, split_values(sweep_values)));
    } catch (const opf::Error& e) {
        std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
}
