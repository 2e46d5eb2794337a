#include "mnlmdp/agents.hpp"

#include "mnlmdp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mnlmdp {

bool QTable::has(int step, StateId s) const {
    if (step < 0 || step >= horizon()) return false;
    const auto& row = present[static_cast<std::size_t>(step)];
    return s >= 0 && static_cast<std::size_t>(s) < row.size() && row[static_cast<std::size_t>(s)];
}

std::string to_string(AgentKind kind) {
    switch (kind) {
    case AgentKind::va_mnl: return "va_mnl";
    case AgentKind::first_order_ucb: return "first_order_ucb";
    case AgentKind::epsilon_greedy: return "epsilon_greedy";
    case AgentKind::oracle: return "oracle";
    }
    return "unknown";
}

AgentKind parse_agent_kind(const std::string& name) {
    if (name == "va_mnl") return AgentKind::va_mnl;
    if (name == "first_order_ucb") return AgentKind::first_order_ucb;
    if (name == "epsilon_greedy") return AgentKind::epsilon_greedy;
    if (name == "oracle") return AgentKind::oracle;
    throw ConfigError("unknown agent kind '" + name + "'");
}

void AgentConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("agent delta must lie in (0, 1)");
    if (kind == AgentKind::epsilon_greedy && !(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError("epsilon must lie in [0, 1]");
    }
    if (kind == AgentKind::first_order_ucb && bonus_scale && !(*bonus_scale > 0.0)) {
        throw ConfigError("bonus_scale must be positive");
    }
    if (!(beta_scale >= 0.0) || !std::isfinite(beta_scale)) throw ConfigError("beta_scale must be finite and nonnegative");
}

namespace {

QTable empty_table(const EnvView& env) {
    QTable q;
    const auto h = static_cast<std::size_t>(env.horizon());
    q.values.assign(h, Matrix::Zero(env.num_states(), env.num_actions()));
    q.raw = q.values;
    q.state_values.assign(h + 1, Vector::Zero(env.num_states()));
    q.present.assign(h, std::vector<char>(static_cast<std::size_t>(env.num_states()), 0));
    return q;
}

void check_estimators(const EnvView& env, std::size_t count) {
    if (count != static_cast<std::size_t>(env.horizon())) {
        throw ConfigError("expected one estimator per step (" + std::to_string(env.horizon()) + "), got " +
                          std::to_string(count));
    }
}

/// Shared backward induction; `bonus(rows, probs, v, step)` returns the optimism term.
template <class Bonus>
QTable backward_induction(const EnvView& env, std::span<const OceeState> estimators, Bonus&& bonus) {
    check_estimators(env, estimators.size());
    QTable q = empty_table(env);
    const double cap = env.horizon();
    for (int h = env.horizon() - 1; h >= 0; --h) {
        const auto hs = static_cast<std::size_t>(h);
        const ParamVector& theta_hat = estimators[hs].estimate;
        for (StateId s : env.features().states_at(h)) {
            q.present[hs][static_cast<std::size_t>(s)] = 1;
            for (ActionId a = 0; a < env.num_actions(); ++a) {
                const FeatureRowSet& rows = env.features().at(h, s, a);
                const Vector p = softmax(logits(rows, theta_hat));
                const Vector v = next_values(q, rows);
                const double raw = env.reward(s, a) + p.dot(v) + bonus(rows, p, v, hs);
                q.raw[hs](s, a) = raw;
                q.values[hs](s, a) = std::clamp(raw, 0.0, cap);
            }
            q.state_values[hs](s) = q.values[hs].row(s).maxCoeff();
        }
    }
    return q;
}

double max_row_norm_sq(const Matrix& rows, const Matrix& inverse) {
    return (rows * inverse).cwiseProduct(rows).rowwise().sum().maxCoeff();
}

} // namespace

Vector next_values(const QTable& q, const FeatureRowSet& rows) {
    Vector v(static_cast<Eigen::Index>(rows.size()));
    const auto& next = q.state_values[static_cast<std::size_t>(rows.step) + 1];
    for (std::size_t j = 0; j < rows.size(); ++j) v(static_cast<Eigen::Index>(j)) = next(rows.next_states[j]);
    return v;
}

QTable compute_q_hat(const EnvView& env, std::span<const OceeState> estimators, double beta) {
    return backward_induction(env, estimators, [&](const FeatureRowSet& rows, const Vector& p, const Vector& v, std::size_t h) {
        if (beta == 0.0) return 0.0;
        const Matrix& inv = estimators[h].info_inverse;
        // Lambda v = p .* v - p (p . v)
        const Vector lambda_v = p.cwiseProduct(v) - p * p.dot(v);
        const Vector first = rows.rows.transpose() * lambda_v;
        const double first_order = std::sqrt(std::max(0.0, first.dot(inv * first)));
        const double second_order = v.maxCoeff() * max_row_norm_sq(rows.rows, inv);
        return beta * first_order + beta * beta * second_order;
    });
}

QTable first_order_ucb_q(const EnvView& env, std::span<const OceeState> estimators,
                         std::span<const Matrix> gram_inverses, double bonus_scale, double beta) {
    check_estimators(env, gram_inverses.size());
    return backward_induction(env, estimators, [&](const FeatureRowSet& rows, const Vector&, const Vector&, std::size_t h) {
        if (beta == 0.0 || bonus_scale == 0.0) return 0.0;
        return bonus_scale * beta * std::sqrt(std::max(0.0, max_row_norm_sq(rows.rows, gram_inverses[h])));
    });
}

ActionId select_action(const QTable& q, int step, StateId s) {
    if (!q.has(step, s)) {
        throw DomainError("no Q values for state " + std::to_string(s) + " at step " + std::to_string(step + 1));
    }
    Eigen::Index best = 0;
    q.values[static_cast<std::size_t>(step)].row(s).maxCoeff(&best);
    return static_cast<ActionId>(best);
}

ActionId epsilon_greedy_step(const QTable& q, int step, StateId s, double epsilon, Rng& rng) {
    const ActionId greedy = select_action(q, step, s);
    if (epsilon > 0.0 && uniform01(rng) < epsilon) {
        const auto actions = static_cast<std::size_t>(q.values[static_cast<std::size_t>(step)].cols());
        return static_cast<ActionId>(uniform_index(rng, actions));
    }
    return greedy;
}

// ---------------------------------------------------------------------------
// Agent

Agent::Agent(const MnlMdp& env, const AgentConfig& config) : Agent(env, config, false) {}

Agent::Agent(const MnlMdp& env, const AgentConfig& config, bool oracle) : env_(env), config_(config) {
    config_.validate();
    if (oracle != (config_.kind == AgentKind::oracle)) {
        throw ConfigError("oracle agents are built with Agent::oracle");
    }
    confidence_ = ConfidenceParams::make(config_.delta, env.dim, env.b_phi, env.b_theta);
    confidence_.moment_uses_post_update = config_.moment_uses_post_update;
    estimators_.assign(static_cast<std::size_t>(env.horizon), ocee_init(confidence_));
    if (config_.kind == AgentKind::first_order_ucb) {
        grams_.assign(static_cast<std::size_t>(env.horizon), Matrix::Identity(env.dim, env.dim));
    }
}

Agent Agent::oracle(const MnlMdp& env, const ValueTable& optimal) {
    AgentConfig cfg;
    cfg.kind = AgentKind::oracle;
    Agent agent(env, cfg, true);
    QTable q = empty_table(agent.env_);
    for (int h = 0; h < env.horizon; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        q.values[hs] = optimal.q[hs];
        q.raw[hs] = optimal.q[hs];
        q.state_values[hs] = optimal.v[hs];
        for (StateId s : env.features.states_at(h)) q.present[hs][static_cast<std::size_t>(s)] = 1;
    }
    agent.q_ = std::move(q);
    return agent;
}

void Agent::begin_episode() {
    const std::uint64_t completed = episodes_++;
    switch (config_.kind) {
    case AgentKind::oracle:
        break;
    case AgentKind::va_mnl:
        beta_ = config_.beta_scale * beta_radius(completed, confidence_);
        q_ = compute_q_hat(env_, estimators_, beta_);
        break;
    case AgentKind::first_order_ucb: {
        beta_ = config_.beta_scale * beta_radius(completed, confidence_);
        std::vector<Matrix> inverses;
        inverses.reserve(grams_.size());
        for (const auto& g : grams_) {
            inverses.push_back(Eigen::LLT<Matrix>(g).solve(Matrix::Identity(g.rows(), g.cols())));
        }
        const double scale = config_.bonus_scale.value_or(2.0 * env_.horizon());
        q_ = first_order_ucb_q(env_, estimators_, inverses, scale, beta_);
        break;
    }
    case AgentKind::epsilon_greedy:
        beta_ = 0.0;
        q_ = compute_q_hat(env_, estimators_, 0.0);
        break;
    }
    q_.episode = episodes_;
}

ActionId Agent::act(int step, StateId s, Rng& rng) const {
    if (config_.kind == AgentKind::epsilon_greedy) return epsilon_greedy_step(q_, step, s, config_.epsilon, rng);
    return select_action(q_, step, s);
}

void Agent::observe(int step, StateId s, ActionId a, StateId next) {
    if (config_.kind == AgentKind::oracle) return;
    const auto hs = static_cast<std::size_t>(step);
    const FeatureRowSet& rows = env_.features().at(step, s, a);
    ocee_update(estimators_[hs], rows, next, confidence_);
    if (config_.kind == AgentKind::first_order_ucb) grams_[hs].noalias() += rows.rows.transpose() * rows.rows;
}

Policy Agent::policy() const {
    const auto horizon = static_cast<std::size_t>(env_.horizon());
    Policy pi(horizon, Matrix::Zero(env_.num_states(), env_.num_actions()));
    const double explore = config_.kind == AgentKind::epsilon_greedy ? config_.epsilon : 0.0;
    const double uniform = explore / env_.num_actions();
    for (std::size_t h = 0; h < horizon; ++h) {
        for (StateId s = 0; s < env_.num_states(); ++s) {
            if (!q_.has(static_cast<int>(h), s)) continue;
            pi[h].row(s).setConstant(uniform);
            pi[h](s, select_action(q_, static_cast<int>(h), s)) += 1.0 - explore;
        }
    }
    return pi;
}

} // namespace mnlmdp
