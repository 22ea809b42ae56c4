// mvap_offload: train offloading policies, sweep the latency requirement, or
// check a configuration file.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvap/config.hpp"
#include "mvap/harness.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string algo;
    std::optional<int> episodes;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
};

void add_common_flags(CLI::App& cmd, Overrides& o) {
    cmd.add_option("--config", o.config_path, "Experiment configuration (JSON)");
    cmd.add_option("--algo", o.algo, "ql | dqn | ddqn | rm | all")
        ->check(CLI::IsMember({"ql", "dqn", "ddqn", "rm", "all"}));
    cmd.add_option("--episodes", o.episodes, "Episodes per run")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", o.seed, "Run a single master seed instead of the configured list");
    cmd.add_option("--out", o.out, "Output directory");
    cmd.add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

mvap::ExperimentConfig resolve(const Overrides& o) {
    mvap::ExperimentConfig cfg = o.config_path.empty() ? mvap::ExperimentConfig{} : mvap::load_config(o.config_path);
    if (!o.algo.empty() && o.algo != "all") cfg.algorithms = {*mvap::parse_algorithm(o.algo)};
    if (o.episodes) cfg.episodes = *o.episodes;
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.threads) cfg.threads = *o.threads;
    mvap::validate(cfg);
    return cfg;
}

int exit_code(const mvap::Error& e) {
    switch (e.code()) {
        case mvap::Errc::ConfigError: return 2;
        case mvap::Errc::IoError: return 3;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MVAP edge-offloading simulator and DRL trainer"};
    app.require_subcommand(1);

    Overrides train_o, sweep_o;
    std::string validate_path;
    std::vector<double> t_values;

    auto* train = app.add_subcommand("train", "Train the selected algorithms and write convergence curves");
    add_common_flags(*train, train_o);

    auto* sweep = app.add_subcommand("sweep", "Train at fixed latency requirements and tabulate final rewards");
    add_common_flags(*sweep, sweep_o);
    sweep->add_option("--t-values", t_values, "Requirement grid in seconds (default: experiment.sweep_t_require_s)")
        ->delimiter(',');

    auto* check = app.add_subcommand("validate-config", "Parse and validate a configuration file");
    check->add_option("--config", validate_path, "Experiment configuration (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto cfg = resolve(train_o);
            const auto campaign = mvap::run_campaign(cfg);
            std::cout << mvap::summary_text(campaign.summary);
            std::cout << "outputs written to " << cfg.output_dir << "\n";
        } else if (*sweep) {
            const auto cfg = resolve(sweep_o);
            const std::vector<double> grid = t_values.empty() ? cfg.sweep_t_require_s : t_values;
            const auto table = mvap::sweep_requirement(cfg, grid);
            std::cout << mvap::sweep_csv(table);
            std::cout << "outputs written to " << cfg.output_dir << "\n";
        } else if (*check) {
            const auto cfg = mvap::load_config(validate_path);
            std::cout << "ok: " << cfg.algorithms.size() << " algorithm(s), " << cfg.seeds.size() << " seed(s), "
                      << cfg.episodes << " episodes, " << cfg.env.split_factor + 1 << " actions\n";
        }
    } catch (const mvap::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
