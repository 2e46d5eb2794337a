// Command-line front end: run experiments, validate configs, describe environments.

#include "mnlmdp/errors.hpp"
#include "mnlmdp/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

using namespace mnlmdp;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
    std::vector<std::uint64_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const auto value = std::stoull(item, &used);
        if (used != item.size()) throw ConfigError("bad seed '" + item + "'");
        out.push_back(value);
    }
    if (out.empty()) throw ConfigError("--seeds needs at least one seed");
    return out;
}

int report(const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MNL-MDP experiment harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment and write episodes.csv / summary.json");
    std::string config_path, output, seeds, agent, env, regret;
    std::uint64_t episodes = 0;
    unsigned threads = 0;
    double beta_scale = -1.0;
    bool record = false;
    run->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--output", output, "Output directory (overrides output_path)");
    run->add_option("--seeds", seeds, "Comma-separated seeds");
    run->add_option("--episodes", episodes, "Episodes per seed")->check(CLI::PositiveNumber);
    run->add_option("--agent", agent, "va_mnl | first_order_ucb | epsilon_greedy");
    run->add_option("--env", env, "riverswim | hard_instance | <file>");
    run->add_option("--regret", regret, "exact | realized")->check(CLI::IsMember({"exact", "realized"}));
    run->add_option("--threads", threads, "Worker threads (0: all cores)");
    run->add_option("--beta-scale", beta_scale, "Multiplier on the confidence radius");
    run->add_flag("--record-trajectories", record, "Also write trajectories.csv");

    auto* validate = app.add_subcommand("validate", "Parse and validate a config and its environment");
    std::string validate_path;
    validate->add_option("--config", validate_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);

    auto* describe = app.add_subcommand("describe-env", "Print sizes, bounds and the kappa diagnostic");
    std::string describe_env;
    std::size_t kappa_samples = 256;
    std::uint64_t kappa_seed = 0;
    describe->add_option("--env", describe_env, "riverswim | hard_instance | <file>")->required();
    describe->add_option("--kappa-samples", kappa_samples, "Random parameters in the kappa search")->check(CLI::PositiveNumber);
    describe->add_option("--seed", kappa_seed, "Seed for the kappa search");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            if (!output.empty()) cfg.output_path = output;
            if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
            if (episodes) cfg.episodes = episodes;
            if (!agent.empty()) cfg.agent.kind = parse_agent_kind(agent);
            if (!env.empty()) cfg.env = env;
            if (!regret.empty()) cfg.regret = regret == "exact" ? RegretMode::exact : RegretMode::realized;
            if (threads) cfg.threads = threads;
            if (beta_scale >= 0.0) cfg.agent.beta_scale = beta_scale;
            if (record) cfg.record_trajectories = true;
            const ExperimentResult result = run_experiment(cfg);
            const CurvePoint& last = result.curve.back();
            std::printf("episodes=%llu seeds=%zu final_regret_mean=%.6g final_regret_std=%.6g wall=%.3fs\n",
                        static_cast<unsigned long long>(cfg.episodes), cfg.seeds.size(), last.regret_mean,
                        last.regret_std, result.summary["wall_time_seconds"].get<double>());
            if (!cfg.output_path.empty()) std::printf("wrote %s\n", cfg.output_path.c_str());
        } else if (*validate) {
            const ExperimentConfig cfg = load_experiment_config(validate_path);
            cfg.validate();
            const MnlMdp e = resolve_env(cfg.env);
            std::printf("ok: %s, S=%d A=%d H=%d d=%d, agent=%s, K=%llu, %zu seeds\n", e.name.c_str(), e.num_states,
                        e.num_actions, e.horizon, e.dim, to_string(cfg.agent.kind).c_str(),
                        static_cast<unsigned long long>(cfg.episodes), cfg.seeds.size());
        } else if (*describe) {
            const MnlMdp e = resolve_env(nlohmann::json(describe_env));
            Rng rng = make_stream(kappa_seed, 0);
            const double kappa = kappa_diagnostic(e, kappa_samples, rng);
            std::printf("name    %s\nS       %d\nA       %d\nH       %d\nd       %d\nB_phi   %.17g\nB_theta %.17g\n"
                        "kappa   %.17g  (upper estimate, %zu samples)\n",
                        e.name.c_str(), e.num_states, e.num_actions, e.horizon, e.dim, e.b_phi, e.b_theta, kappa,
                        kappa_samples);
        }
    } catch (const ParseError& err) {
        return report(err);
    } catch (const std::exception& err) {
        return report(err);
    }
    return 0;
}
