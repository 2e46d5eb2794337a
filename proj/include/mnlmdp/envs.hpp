#pragma once

#include "mnlmdp/mnl_core.hpp"
#include "mnlmdp/types.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mnlmdp {

/// Sparse (step, state, action) -> FeatureRowSet table. A state is "present" at a
/// step when rows exist for every action there; only present states are ever
/// visited or valued at that step.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int horizon, int num_states, int num_actions, int dim);

    /// Inserts or replaces the entry at (rows.step, rows.state, rows.action).
    /// `target` optionally declares the intended transition probabilities.
    void set(FeatureRowSet rows, Vector target = {});

    bool has(int step, StateId s) const;
    bool has(int step, StateId s, ActionId a) const;
    const FeatureRowSet& at(int step, StateId s, ActionId a) const;
    /// Declared target probabilities, empty when none were given.
    const Vector& target(int step, StateId s, ActionId a) const;

    /// Present states at `step`, ascending.
    std::vector<StateId> states_at(int step) const;

    int horizon() const noexcept { return horizon_; }
    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    int dim() const noexcept { return dim_; }

    template <class F>
    void for_each(F&& f) const {
        for (const auto& e : entries_) f(e);
    }

private:
    std::size_t slot(int step, StateId s, ActionId a) const;

    int horizon_ = 0;
    int num_states_ = 0;
    int num_actions_ = 0;
    int dim_ = 0;
    std::vector<int> index_; // -1 when absent
    std::vector<FeatureRowSet> entries_;
    std::vector<Vector> targets_;
};

struct MnlMdp {
    std::string name;
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    int dim = 0;
    Matrix rewards; // num_states x num_actions, in [0, 1]
    FeatureMap features;
    std::vector<ParamVector> theta_star; // one per step
    double b_phi = 0.0;
    double b_theta = 0.0;
    StateId initial_state = 0;
    /// Construction parameters, echoed into experiment summaries.
    nlohmann::json params = nlohmann::json::object();

    /// Exact transition kernel at step `step` under theta*.
    CategoricalDist kernel(int step, StateId s, ActionId a) const;

    /// Checks every invariant; throws ValidationError naming the violated bound.
    void validate() const;
};

/// What an agent may see: everything except theta*.
class EnvView {
public:
    explicit EnvView(const MnlMdp& env) : env_(&env) {}

    int num_states() const noexcept { return env_->num_states; }
    int num_actions() const noexcept { return env_->num_actions; }
    int horizon() const noexcept { return env_->horizon; }
    int dim() const noexcept { return env_->dim; }
    double b_phi() const noexcept { return env_->b_phi; }
    double b_theta() const noexcept { return env_->b_theta; }
    double reward(StateId s, ActionId a) const { return env_->rewards(s, a); }
    const FeatureMap& features() const noexcept { return env_->features; }

private:
    const MnlMdp* env_;
};

enum class RiverSwimVariant { text, figure };

/// one_hot: one coordinate per (state, action, next-state slot), theta* = log p.
/// reference: the first slot of each (state, action) is the zero row and the
/// remaining coordinates hold log(p_j / p_first); no direction of theta is
/// invisible to the likelihood.
enum class RiverSwimFeatures { one_hot, reference };

/// Chain of S states with a current toward state 0, tabular features.
MnlMdp make_riverswim(int num_states, int horizon, RiverSwimVariant variant = RiverSwimVariant::text,
                      RiverSwimFeatures features = RiverSwimFeatures::one_hot);

struct HardInstanceSpec {
    int dim = 2;
    int horizon = 4;
    double delta_gap = 0.01;     // Delta in (0, log 2 / (4(d-1)))
    double epsilon_level = 0.1;  // epsilon in (0, 1/H)
    /// (d-1) x H matrix of +-1; column h gives the optimal action at step h.
    std::vector<std::vector<int>> perturbation;
    /// Base parameters per step with a nonzero last coordinate; empty means e_d.
    std::vector<ParamVector> base_theta;
};

struct HardInstanceConstants {
    double delta_tilde = 0.0;
    double phi = 0.0;
    /// 1 / (1 + 2 phi exp(-2x)): probability of reaching the absorbing state.
    double success_probability(double x) const;
};

HardInstanceConstants hard_instance_constants(const HardInstanceSpec& spec);

/// Largest hypercube dimension (d - 1) materialized as an explicit action list.
inline constexpr int kHardInstanceMaxSignDims = 12;

/// Action id <-> sign vector: bit i of the id set means a_i = +sqrt(Delta).
std::vector<int> hard_instance_action_signs(ActionId a, int sign_dims);
ActionId hard_instance_action_id(std::span<const int> signs);

/// Layered instance with 2H + 1 states and an absorbing rewarding state 2H
/// (0-based). Layer states {2h, 2h+1} at step h reach {2H, 2h+2, 2h+3}; the last
/// step wraps to its own layer since its successor is never valued.
MnlMdp make_hard_instance(const HardInstanceSpec& spec);

/// Per-step value tables; v has horizon + 1 entries (the last is all zeros).
struct ValueTable {
    std::vector<Vector> v; // [step] -> num_states
    std::vector<Matrix> q; // [step] -> num_states x num_actions
};

/// Action distribution per (step, state): policy[step] is num_states x num_actions.
using Policy = std::vector<Matrix>;

ValueTable optimal_values(const MnlMdp& env);

/// Exact evaluation of a (possibly stochastic) Markov policy under theta*.
std::vector<Vector> evaluate_policy(const MnlMdp& env, const Policy& policy);

/// Deterministic policy picking argmax_a q[step](s, a), lowest id on ties.
Policy greedy_policy(const MnlMdp& env, const std::vector<Matrix>& q);

inline constexpr int kEnvSchemaVersion = 1;

/// Builds an environment from a config document (see README for the schema).
MnlMdp load_env(const nlohmann::json& doc);
MnlMdp load_env_file(const std::string& path);

/// Fully expanded "custom" document; load_env(env_to_json(e)) reproduces e.
nlohmann::json env_to_json(const MnlMdp& env);

} // namespace mnlmdp
