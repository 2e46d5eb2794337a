#pragma once

#include "mnlmdp/agents.hpp"
#include "mnlmdp/envs.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mnlmdp {

struct Transition {
    int step = 0; // 0-based
    StateId state = 0;
    ActionId action = 0;
    StateId next = 0;
    double reward = 0.0;
    bool operator==(const Transition&) const = default;
};

struct EpisodeLog {
    std::uint64_t episode = 0; // 1-based
    std::uint64_t seed = 0;
    double total_reward = 0.0;
    double instant_regret = 0.0;
    double cumulative_regret = 0.0;
    double variance_sum = 0.0; // sum_h sigma^2(s_h, a_h) under theta*
    std::vector<Transition> trajectory;

    bool operator==(const EpisodeLog&) const = default;
};

enum class RegretMode { exact, realized };

struct EpisodeOptions {
    RegretMode regret = RegretMode::exact;
    bool record_trajectory = false;
    /// Called after the agent has planned and before the first action.
    std::function<void(const Agent&)> on_plan;
};

/// Plays one episode. Instant regret is V*_1(s_1) minus the exact value of the
/// policy the agent deployed this episode (or minus the realized return in
/// RegretMode::realized).
EpisodeLog run_episode(const MnlMdp& env, const ValueTable& optimal, Agent& agent, Rng& env_rng,
                       Rng& agent_rng, const EpisodeOptions& options = {});

struct ExperimentConfig {
    /// Inline environment document, or a string: "riverswim", "hard_instance" or a file path.
    nlohmann::json env = "riverswim";
    AgentConfig agent;
    std::uint64_t episodes = 1;
    std::vector<std::uint64_t> seeds{0};
    double delta = 0.1;
    std::string output_path; // empty: no files
    bool record_trajectories = false;
    std::uint64_t checkpoint_every = 0; // 0: never
    RegretMode regret = RegretMode::exact;
    unsigned threads = 0; // 0: hardware concurrency

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& doc);
};

ExperimentConfig load_experiment_config(const std::string& path);

/// Resolves ExperimentConfig::env.
MnlMdp resolve_env(const nlohmann::json& ref);

struct CurvePoint {
    double regret_mean = 0.0;
    double regret_std = 0.0;
    double variance_mean = 0.0;
};

/// Per-episode sample mean and sample standard deviation (n - 1 divisor) of
/// cumulative regret across seeds.
std::vector<CurvePoint> regret_curve_stats(const std::vector<std::vector<EpisodeLog>>& runs);

struct ExperimentResult {
    std::vector<std::vector<EpisodeLog>> runs; // in config seed order
    std::vector<CurvePoint> curve;
    nlohmann::json summary;
};

/// K episodes for one seed; the agent is built fresh from `agent_config`.
std::vector<EpisodeLog> run_seed(const MnlMdp& env, const ValueTable& optimal, const AgentConfig& agent_config,
                                 std::uint64_t seed, std::uint64_t episodes, const EpisodeOptions& options = {},
                                 const std::function<void(std::uint64_t, const Agent&)>& after_episode = {});

/// Runs every seed and, when output_path is set, writes episodes.csv,
/// summary.json, and optionally trajectories.csv and checkpoints/.
/// The output directory is checked before any simulation starts.
ExperimentResult run_experiment(const ExperimentConfig& config);

inline constexpr const char* kEpisodeCsvHeader = "seed,episode,total_reward,instant_regret,cumulative_regret,variance_sum";

/// 17-significant-digit CSV rows, one per episode, seeds in config order.
std::string episodes_csv(const std::vector<std::vector<EpisodeLog>>& runs);

/// Sampling-based upper estimate of the Fisher information lower bound kappa:
/// the smallest eigenvalue of each reachable-set Hessian on the complement of
/// the all-ones direction, minimized over steps, states, actions and candidate
/// parameters {0, +-B_theta e_i, `samples` points on the B_theta sphere}.
/// Singleton reachable sets carry no curvature and are skipped; 0 if all are singletons.
double kappa_diagnostic(const MnlMdp& env, std::size_t samples, Rng& rng);

nlohmann::json env_metadata(const MnlMdp& env);

std::string sha256_hex(const std::string& data);

} // namespace mnlmdp
