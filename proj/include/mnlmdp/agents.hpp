#pragma once

#include "mnlmdp/envs.hpp"
#include "mnlmdp/estimator.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mnlmdp {

/// Optimistic (or certainty-equivalence) action values for one episode.
struct QTable {
    std::vector<Matrix> values;        // [step] -> S x A, clamped to [0, H]
    std::vector<Matrix> raw;           // same before the [0, H] clamp
    std::vector<Vector> state_values;  // [step] -> S; one extra all-zero layer at the end
    std::vector<std::vector<char>> present; // [step][state]
    std::uint64_t episode = 0;

    bool has(int step, StateId s) const;
    int horizon() const noexcept { return static_cast<int>(values.size()); }
};

enum class AgentKind { va_mnl, first_order_ucb, epsilon_greedy, oracle };

std::string to_string(AgentKind kind);
AgentKind parse_agent_kind(const std::string& name);

struct AgentConfig {
    AgentKind kind = AgentKind::va_mnl;
    double delta = 0.1;
    /// Exploration rate of the epsilon-greedy baseline.
    double epsilon = 0.1;
    /// Multiplier of the first-order baseline bonus (the 2H kappa^{-1/2} factor);
    /// unset means 2H, i.e. kappa = 1.
    std::optional<double> bonus_scale;
    /// Multiplies the confidence radius beta_k of both UCB agents; 1 is the
    /// theoretical radius.
    double beta_scale = 1.0;
    bool moment_uses_post_update = false;

    void validate() const;
};

/// V-hat(h+1) gathered over a reachable set; zero past the horizon.
Vector next_values(const QTable& q, const FeatureRowSet& rows);

/// Backward induction with the second-order optimistic bonus:
///   Q = P_H( r + p^T v + beta |Phi^T Lambda v|_{H^-1} + beta^2 max(v) max_j |phi_j|^2_{H^-1} )
/// where p and Lambda are the softmax and its Hessian at theta_hat_h and v the next-step values.
/// `estimators[h]` supplies theta_hat_h and H^-1 for step h.
QTable compute_q_hat(const EnvView& env, std::span<const OceeState> estimators, double beta);

/// Same backup with a single bonus bonus_scale * beta * max_j |phi_j|_{A^-1},
/// where A = I + sum Phi^T Phi is the unweighted Gram matrix of step h.
QTable first_order_ucb_q(const EnvView& env, std::span<const OceeState> estimators,
                         std::span<const Matrix> gram_inverses, double bonus_scale, double beta);

/// Argmax over actions; lowest action id wins ties.
ActionId select_action(const QTable& q, int step, StateId s);

/// With probability epsilon a uniform action, otherwise select_action.
ActionId epsilon_greedy_step(const QTable& q, int step, StateId s, double epsilon, Rng& rng);

/// Learner driving one seed of an experiment: plans at the start of each episode,
/// acts, and consumes transitions.
class Agent {
public:
    Agent(const MnlMdp& env, const AgentConfig& config);
    /// Plays argmax Q* (needs theta*); used as a zero-regret reference.
    static Agent oracle(const MnlMdp& env, const ValueTable& optimal);

    /// Recomputes the Q table from everything observed so far.
    void begin_episode();
    ActionId act(int step, StateId s, Rng& rng) const;
    void observe(int step, StateId s, ActionId a, StateId next);

    /// Action distribution deployed this episode.
    Policy policy() const;

    const QTable& q() const noexcept { return q_; }
    const AgentConfig& config() const noexcept { return config_; }
    const ConfidenceParams& confidence() const noexcept { return confidence_; }
    const std::vector<OceeState>& estimators() const noexcept { return estimators_; }
    std::vector<OceeState>& estimators() noexcept { return estimators_; }
    /// Radius used in the current episode's plan.
    double current_beta() const noexcept { return beta_; }
    std::uint64_t episodes_started() const noexcept { return episodes_; }

private:
    Agent(const MnlMdp& env, const AgentConfig& config, bool oracle);

    EnvView env_;
    AgentConfig config_;
    ConfidenceParams confidence_;
    std::vector<OceeState> estimators_;
    std::vector<Matrix> grams_;
    QTable q_;
    double beta_ = 0.0;
    std::uint64_t episodes_ = 0;
};

} // namespace mnlmdp
