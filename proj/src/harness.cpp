#include "mnlmdp/harness.hpp"

#include "mnlmdp/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace mnlmdp {

using nlohmann::json;

EpisodeLog run_episode(const MnlMdp& env, const ValueTable& optimal, Agent& agent, Rng& env_rng,
                       Rng& agent_rng, const EpisodeOptions& options) {
    agent.begin_episode();
    if (options.on_plan) options.on_plan(agent);

    EpisodeLog log;
    log.episode = agent.episodes_started();
    const StateId start = env.initial_state;
    StateId s = start;
    for (int h = 0; h < env.horizon; ++h) {
        const ActionId a = agent.act(h, s, agent_rng);
        const double r = env.rewards(s, a);
        const CategoricalDist dist = env.kernel(h, s, a);
        const StateId next = sample_next_state(dist, env_rng);
        log.total_reward += r;
        log.variance_sum += sigma_squared_from_probs(dist.probs);
        if (options.record_trajectory) log.trajectory.push_back({h, s, a, next, r});
        agent.observe(h, s, a, next);
        s = next;
    }
    const double best = optimal.v.front()(start);
    if (options.regret == RegretMode::exact) {
        // q() is still the table this episode was played with; observe() does not replan.
        log.instant_regret = best - evaluate_policy(env, agent.policy()).front()(start);
    } else {
        log.instant_regret = best - log.total_reward;
    }
    return log;
}

std::vector<EpisodeLog> run_seed(const MnlMdp& env, const ValueTable& optimal, const AgentConfig& agent_config,
                                 std::uint64_t seed, std::uint64_t episodes, const EpisodeOptions& options,
                                 const std::function<void(std::uint64_t, const Agent&)>& after_episode) {
    Agent agent = agent_config.kind == AgentKind::oracle ? Agent::oracle(env, optimal) : Agent(env, agent_config);
    Rng env_rng = make_stream(seed, 0);
    Rng agent_rng = make_stream(seed, 1);
    std::vector<EpisodeLog> logs;
    logs.reserve(episodes);
    double cumulative = 0.0;
    for (std::uint64_t k = 1; k <= episodes; ++k) {
        EpisodeLog log = run_episode(env, optimal, agent, env_rng, agent_rng, options);
        log.seed = seed;
        log.episode = k;
        cumulative += log.instant_regret;
        log.cumulative_regret = cumulative;
        logs.push_back(std::move(log));
        if (after_episode) after_episode(k, agent);
    }
    return logs;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (episodes < 1) throw ConfigError("episodes must be at least 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw ConfigError("seeds must be duplicate-free");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    AgentConfig a = agent;
    a.delta = delta;
    a.validate();
}

namespace {

std::string regret_name(RegretMode m) { return m == RegretMode::exact ? "exact" : "realized"; }

template <class T>
T get_as(const json& doc, const char* key, const std::string& path) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& err) {
        throw ParseError(path + "/" + key, err.what());
    }
}

} // namespace

json ExperimentConfig::to_json() const {
    json a = {{"kind", to_string(agent.kind)},
              {"epsilon", agent.epsilon},
              {"beta_scale", agent.beta_scale},
              {"moment_uses_post_update", agent.moment_uses_post_update}};
    if (agent.bonus_scale) a["bonus_scale"] = *agent.bonus_scale;
    return {{"env", env},
            {"agent", a},
            {"episodes", episodes},
            {"seeds", seeds},
            {"delta", delta},
            {"output_path", output_path},
            {"record_trajectories", record_trajectories},
            {"checkpoint_every", checkpoint_every},
            {"regret", regret_name(regret)}};
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("", "experiment config must be an object");
    ExperimentConfig c;
    if (doc.contains("env")) c.env = doc["env"];
    if (doc.contains("agent")) {
        const json& a = doc["agent"];
        if (a.is_string()) {
            c.agent.kind = parse_agent_kind(a.get<std::string>());
        } else if (a.is_object()) {
            if (a.contains("kind")) c.agent.kind = parse_agent_kind(get_as<std::string>(a, "kind", "/agent"));
            if (a.contains("epsilon")) c.agent.epsilon = get_as<double>(a, "epsilon", "/agent");
            if (a.contains("bonus_scale")) c.agent.bonus_scale = get_as<double>(a, "bonus_scale", "/agent");
            if (a.contains("beta_scale")) c.agent.beta_scale = get_as<double>(a, "beta_scale", "/agent");
            if (a.contains("moment_uses_post_update")) {
                c.agent.moment_uses_post_update = get_as<bool>(a, "moment_uses_post_update", "/agent");
            }
        } else {
            throw ParseError("/agent", "expected an agent name or object");
        }
    }
    if (doc.contains("episodes")) c.episodes = get_as<std::uint64_t>(doc, "episodes", "");
    if (doc.contains("seeds")) c.seeds = get_as<std::vector<std::uint64_t>>(doc, "seeds", "");
    if (doc.contains("delta")) c.delta = get_as<double>(doc, "delta", "");
    if (doc.contains("output_path")) c.output_path = get_as<std::string>(doc, "output_path", "");
    if (doc.contains("record_trajectories")) c.record_trajectories = get_as<bool>(doc, "record_trajectories", "");
    if (doc.contains("checkpoint_every")) c.checkpoint_every = get_as<std::uint64_t>(doc, "checkpoint_every", "");
    if (doc.contains("threads")) c.threads = get_as<unsigned>(doc, "threads", "");
    if (doc.contains("regret")) {
        const auto mode = get_as<std::string>(doc, "regret", "");
        if (mode == "exact") c.regret = RegretMode::exact;
        else if (mode == "realized") c.regret = RegretMode::realized;
        else throw ParseError("/regret", "expected \"exact\" or \"realized\"");
    }
    c.agent.delta = c.delta;
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ParseError("", std::string("invalid JSON in ") + path + ": " + err.what());
    }
    ExperimentConfig c = ExperimentConfig::from_json(doc);
    // Relative environment paths are taken relative to the config file.
    if (c.env.is_string()) {
        const auto name = c.env.get<std::string>();
        if (name != "riverswim" && name != "hard_instance") {
            std::filesystem::path p(name);
            if (p.is_relative()) c.env = (std::filesystem::path(path).parent_path() / p).string();
        }
    }
    return c;
}

MnlMdp resolve_env(const json& ref) {
    if (ref.is_string()) {
        const auto name = ref.get<std::string>();
        if (name == "riverswim") return make_riverswim(4, 12);
        if (name == "hard_instance") {
            HardInstanceSpec spec;
            spec.dim = 3;
            spec.horizon = 4;
            spec.delta_gap = 0.05;
            spec.epsilon_level = 0.1;
            spec.perturbation.assign(2, std::vector<int>(4, 1));
            return make_hard_instance(spec);
        }
        return load_env_file(name);
    }
    if (ref.is_object() && ref.contains("path") && !ref.contains("kind")) {
        return load_env_file(ref["path"].get<std::string>());
    }
    return load_env(ref);
}

// ---------------------------------------------------------------------------
// Aggregation and output

std::vector<CurvePoint> regret_curve_stats(const std::vector<std::vector<EpisodeLog>>& runs) {
    if (runs.empty()) return {};
    const std::size_t k = runs.front().size();
    for (const auto& r : runs) {
        if (r.size() != k) throw DomainError("regret_curve_stats: runs have different lengths");
    }
    const double n = static_cast<double>(runs.size());
    std::vector<CurvePoint> out(k);
    std::vector<double> regret(runs.size());
    std::vector<double> variance(runs.size());
    for (std::size_t e = 0; e < k; ++e) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            regret[i] = runs[i][e].cumulative_regret;
            variance[i] = runs[i][e].variance_sum;
        }
        // Sorting fixes the summation order, so seed order cannot change a bit.
        std::sort(regret.begin(), regret.end());
        std::sort(variance.begin(), variance.end());
        double sum = 0.0;
        double vsum = 0.0;
        for (std::size_t i = 0; i < regret.size(); ++i) {
            sum += regret[i];
            vsum += variance[i];
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (double x : regret) ss += (x - mean) * (x - mean);
        out[e].regret_mean = mean;
        out[e].regret_std = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        out[e].variance_mean = vsum / n;
    }
    return out;
}

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::ofstream open_or_throw(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

} // namespace

std::string episodes_csv(const std::vector<std::vector<EpisodeLog>>& runs) {
    std::string out = std::string(kEpisodeCsvHeader) + "\n";
    for (const auto& run : runs) {
        for (const auto& e : run) {
            out += std::to_string(e.seed) + "," + std::to_string(e.episode) + "," + fmt17(e.total_reward) + "," +
                   fmt17(e.instant_regret) + "," + fmt17(e.cumulative_regret) + "," + fmt17(e.variance_sum) + "\n";
        }
    }
    return out;
}

json env_metadata(const MnlMdp& env) {
    return {{"name", env.name},       {"num_states", env.num_states}, {"num_actions", env.num_actions},
            {"horizon", env.horizon}, {"dim", env.dim},               {"b_phi", env.b_phi},
            {"b_theta", env.b_theta}, {"initial_state", env.initial_state}, {"params", env.params}};
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const MnlMdp env = resolve_env(config.env);
    const ValueTable optimal = optimal_values(env);
    AgentConfig agent_config = config.agent;
    agent_config.delta = config.delta;

    namespace fs = std::filesystem;
    const bool write = !config.output_path.empty();
    const fs::path out_dir(config.output_path);
    std::ofstream csv_out, summary_out, traj_out;
    if (write) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
        csv_out = open_or_throw(out_dir / "episodes.csv");
        summary_out = open_or_throw(out_dir / "summary.json");
        if (config.record_trajectories) traj_out = open_or_throw(out_dir / "trajectories.csv");
        if (config.checkpoint_every > 0) {
            fs::create_directories(out_dir / "checkpoints", ec);
            if (ec) throw IoError("cannot create checkpoint directory: " + ec.message());
        }
    }

    EpisodeOptions options;
    options.regret = config.regret;
    options.record_trajectory = config.record_trajectories;

    ExperimentResult result;
    result.runs.resize(config.seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
            try {
                const std::uint64_t seed = config.seeds[i];
                std::function<void(std::uint64_t, const Agent&)> checkpoint;
                if (write && config.checkpoint_every > 0) {
                    checkpoint = [&, seed](std::uint64_t k, const Agent& agent) {
                        if (k % config.checkpoint_every != 0) return;
                        json states = json::array();
                        for (const auto& est : agent.estimators()) states.push_back(to_json(est));
                        const json doc = {{"seed", seed}, {"episode", k}, {"agent", to_string(agent.config().kind)},
                                          {"confidence", to_json(agent.confidence())}, {"estimators", states}};
                        auto f = open_or_throw(out_dir / "checkpoints" /
                                               ("seed" + std::to_string(seed) + "_episode" + std::to_string(k) + ".json"));
                        f << doc.dump() << "\n";
                    };
                }
                result.runs[i] = run_seed(env, optimal, agent_config, seed, config.episodes, options, checkpoint);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, config.seeds.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    result.curve = regret_curve_stats(result.runs);
    json per_episode = json::array();
    for (std::size_t e = 0; e < result.curve.size(); ++e) {
        per_episode.push_back({{"k", e + 1},
                               {"regret_mean", result.curve[e].regret_mean},
                               {"regret_std", result.curve[e].regret_std},
                               {"variance_mean", result.curve[e].variance_mean}});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.summary = {{"config_digest", sha256_hex(config.to_json().dump())},
                      {"env_metadata", env_metadata(env)},
                      {"per_episode", std::move(per_episode)},
                      {"wall_time_seconds", wall}};

    if (write) {
        csv_out << episodes_csv(result.runs);
        summary_out << result.summary.dump(2) << "\n";
        if (config.record_trajectories) {
            traj_out << "seed,episode,step,state,action,next_state,reward\n";
            for (const auto& run : result.runs)
                for (const auto& e : run)
                    for (const auto& t : e.trajectory)
                        traj_out << e.seed << ',' << e.episode << ',' << t.step + 1 << ',' << t.state << ',' << t.action
                                 << ',' << t.next << ',' << fmt17(t.reward) << '\n';
        }
        if (!csv_out || !summary_out) throw IoError("failed while writing results to " + out_dir.string());
    }
    return result;
}

// ---------------------------------------------------------------------------
// kappa

double kappa_diagnostic(const MnlMdp& env, std::size_t samples, Rng& rng) {
    const Eigen::Index d = env.dim;
    std::vector<ParamVector> candidates;
    candidates.push_back(ParamVector::Zero(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        candidates.push_back(env.b_theta * ParamVector::Unit(d, i));
        candidates.push_back(-env.b_theta * ParamVector::Unit(d, i));
    }
    std::normal_distribution<double> gauss;
    for (std::size_t i = 0; i < samples; ++i) {
        ParamVector g(d);
        for (Eigen::Index j = 0; j < d; ++j) g(j) = gauss(rng);
        const double n = g.norm();
        candidates.push_back(n > 0.0 ? ParamVector(env.b_theta * g / n) : ParamVector::Zero(d));
    }

    double best = std::numeric_limits<double>::infinity();
    env.features.for_each([&](const FeatureRowSet& rows) {
        const auto m = static_cast<Eigen::Index>(rows.size());
        if (m < 2) return;
        // Columns 1..m-1 of the Householder Q of the ones vector span its complement.
        const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Ones(m, 1)).householderQ();
        const Matrix basis = q.rightCols(m - 1);
        for (const auto& theta : candidates) {
            const Matrix restricted = basis.transpose() * hessian_log_sum_exp(rows, theta) * basis;
            Eigen::SelfAdjointEigenSolver<Matrix> eig(restricted, Eigen::EigenvaluesOnly);
            best = std::min(best, eig.eigenvalues().minCoeff());
        }
    });
    return std::isfinite(best) ? best : 0.0;
}

} // namespace mnlmdp
