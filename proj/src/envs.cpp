#include "mnlmdp/envs.hpp"

#include "mnlmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mnlmdp {

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(int horizon, int num_states, int num_actions, int dim)
    : horizon_(horizon), num_states_(num_states), num_actions_(num_actions), dim_(dim),
      index_(static_cast<std::size_t>(horizon) * num_states * num_actions, -1) {
    if (horizon < 1 || num_states < 1 || num_actions < 1 || dim < 1) {
        throw DomainError("feature map needs positive horizon, state count, action count and dimension");
    }
}

std::size_t FeatureMap::slot(int step, StateId s, ActionId a) const {
    if (step < 0 || step >= horizon_ || s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) {
        throw DomainError("feature map index (" + std::to_string(step) + ", " + std::to_string(s) +
                          ", " + std::to_string(a) + ") out of range");
    }
    return (static_cast<std::size_t>(step) * num_states_ + s) * num_actions_ + a;
}

void FeatureMap::set(FeatureRowSet rows, Vector target) {
    rows.validate();
    if (rows.dim() != dim_) throw DomainError("feature rows have dimension " + std::to_string(rows.dim()));
    for (StateId n : rows.next_states) {
        if (n < 0 || n >= num_states_) throw DomainError("next state " + std::to_string(n) + " out of range");
    }
    if (target.size() != 0 && static_cast<std::size_t>(target.size()) != rows.size()) {
        throw DomainError("declared target length does not match the reachable set");
    }
    const std::size_t k = slot(rows.step, rows.state, rows.action);
    if (index_[k] >= 0) {
        entries_[static_cast<std::size_t>(index_[k])] = std::move(rows);
        targets_[static_cast<std::size_t>(index_[k])] = std::move(target);
        return;
    }
    index_[k] = static_cast<int>(entries_.size());
    entries_.push_back(std::move(rows));
    targets_.push_back(std::move(target));
}

bool FeatureMap::has(int step, StateId s, ActionId a) const { return index_[slot(step, s, a)] >= 0; }

bool FeatureMap::has(int step, StateId s) const {
    for (ActionId a = 0; a < num_actions_; ++a) {
        if (!has(step, s, a)) return false;
    }
    return true;
}

const FeatureRowSet& FeatureMap::at(int step, StateId s, ActionId a) const {
    const int i = index_[slot(step, s, a)];
    if (i < 0) {
        throw DomainError("no feature rows at (" + std::to_string(step) + ", " + std::to_string(s) +
                          ", " + std::to_string(a) + ")");
    }
    return entries_[static_cast<std::size_t>(i)];
}

const Vector& FeatureMap::target(int step, StateId s, ActionId a) const {
    const int i = index_[slot(step, s, a)];
    if (i < 0) throw DomainError("no feature rows at requested index");
    return targets_[static_cast<std::size_t>(i)];
}

std::vector<StateId> FeatureMap::states_at(int step) const {
    std::vector<StateId> out;
    for (StateId s = 0; s < num_states_; ++s) {
        if (has(step, s)) out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// MnlMdp

CategoricalDist MnlMdp::kernel(int step, StateId s, ActionId a) const {
    return transition_dist(features.at(step, s, a), theta_star.at(static_cast<std::size_t>(step)));
}

namespace {

constexpr double kNormSlack = 1e-12;
constexpr double kTargetTolerance = 1e-9;

} // namespace

void MnlMdp::validate() const {
    if (num_states < 1 || num_actions < 1 || horizon < 1 || dim < 1) {
        throw ValidationError("environment sizes must be positive");
    }
    if (rewards.rows() != num_states || rewards.cols() != num_actions) {
        throw ValidationError("reward table shape does not match states x actions");
    }
    if ((rewards.array() < 0.0).any() || (rewards.array() > 1.0).any()) {
        throw ValidationError("rewards must lie in [0, 1]");
    }
    if (static_cast<int>(theta_star.size()) != horizon) {
        throw ValidationError("theta_star needs one parameter vector per step");
    }
    for (int h = 0; h < horizon; ++h) {
        const auto& th = theta_star[static_cast<std::size_t>(h)];
        if (th.size() != dim) throw ValidationError("theta_star[" + std::to_string(h) + "] has the wrong dimension");
        if (th.norm() > b_theta * (1.0 + kNormSlack)) {
            throw ValidationError("|theta_star[" + std::to_string(h) + "]| = " + std::to_string(th.norm()) +
                                  " exceeds b_theta = " + std::to_string(b_theta));
        }
    }
    if (!features.has(0, initial_state)) throw ValidationError("initial state has no feature rows at step 1");

    features.for_each([&](const FeatureRowSet& rows) {
        for (Eigen::Index j = 0; j < rows.rows.rows(); ++j) {
            const double n = rows.rows.row(j).norm();
            if (n > b_phi * (1.0 + kNormSlack)) {
                throw ValidationError("feature row norm " + std::to_string(n) + " at (step " +
                                      std::to_string(rows.step + 1) + ", state " + std::to_string(rows.state) +
                                      ", action " + std::to_string(rows.action) + ") exceeds b_phi = " +
                                      std::to_string(b_phi));
            }
        }
        if (!features.has(rows.step, rows.state)) {
            throw ValidationError("state " + std::to_string(rows.state) + " at step " + std::to_string(rows.step + 1) +
                                  " lacks rows for some action");
        }
        if (rows.step + 1 < horizon) {
            for (StateId n : rows.next_states) {
                if (!features.has(rows.step + 1, n)) {
                    throw ValidationError("state " + std::to_string(n) + " is reachable at step " +
                                          std::to_string(rows.step + 1) + " but has no rows at step " +
                                          std::to_string(rows.step + 2));
                }
            }
        }
        const Vector& target = features.target(rows.step, rows.state, rows.action);
        if (target.size() != 0) {
            if (std::abs(target.sum() - 1.0) > kTargetTolerance || (target.array() < 0.0).any()) {
                throw ValidationError("declared target probabilities at (step " + std::to_string(rows.step + 1) +
                                      ", state " + std::to_string(rows.state) + ", action " +
                                      std::to_string(rows.action) + ") do not form a distribution");
            }
            const Vector p = transition_dist(rows, theta_star[static_cast<std::size_t>(rows.step)]).probs;
            if ((p - target).cwiseAbs().maxCoeff() > kTargetTolerance) {
                throw ValidationError("theta_star does not reproduce the declared target probabilities at (step " +
                                      std::to_string(rows.step + 1) + ", state " + std::to_string(rows.state) +
                                      ", action " + std::to_string(rows.action) + ")");
            }
        }
    });
}

// ---------------------------------------------------------------------------
// RiverSwim

MnlMdp make_riverswim(int num_states, int horizon, RiverSwimVariant variant, RiverSwimFeatures features) {
    if (num_states < 2) throw DomainError("RiverSwim needs at least 2 states");
    if (horizon < 1) throw DomainError("RiverSwim needs a positive horizon");
    constexpr ActionId kLeft = 0;
    constexpr ActionId kRight = 1;
    const StateId last = num_states - 1;

    struct Arc {
        StateId s;
        ActionId a;
        std::vector<StateId> next;
        std::vector<double> prob;
    };
    const bool text = variant == RiverSwimVariant::text;
    std::vector<Arc> arcs;
    for (StateId s = 0; s < num_states; ++s) {
        if (s == 0) {
            arcs.push_back({s, kLeft, {0}, {1.0}});
            arcs.push_back({s, kRight, {0, 1}, {0.4, 0.6}});
        } else if (s == last) {
            arcs.push_back({s, kLeft, {s - 1}, {1.0}});
            arcs.push_back({s, kRight, {s - 1, s}, {0.4, 0.6}});
        } else {
            arcs.push_back({s, kLeft, {s - 1}, {1.0}});
            if (text) {
                arcs.push_back({s, kRight, {s - 1, s, s + 1}, {0.30, 0.35, 0.35}});
            } else {
                arcs.push_back({s, kRight, {s - 1, s, s + 1}, {0.05, 0.60, 0.35}});
            }
        }
    }
    // Reference coding drops the first slot of every arc: its row is zero and the
    // other slots carry log(p_j / p_0).
    const int skip = features == RiverSwimFeatures::reference ? 1 : 0;
    int dim = 0;
    for (const auto& arc : arcs) dim += static_cast<int>(arc.next.size()) - skip;

    MnlMdp env;
    env.name = "riverswim";
    env.num_states = num_states;
    env.num_actions = 2;
    env.horizon = horizon;
    env.dim = dim;
    env.rewards = Matrix::Zero(num_states, 2);
    env.rewards(0, kLeft) = 0.005;
    env.rewards(last, kRight) = 1.0;
    env.features = FeatureMap(horizon, num_states, 2, dim);

    ParamVector theta = ParamVector::Zero(dim);
    int coord = 0;
    std::vector<int> first_coord;
    for (const auto& arc : arcs) {
        first_coord.push_back(coord);
        for (std::size_t j = static_cast<std::size_t>(skip); j < arc.prob.size(); ++j) {
            theta(coord++) = std::log(arc.prob[j]) - (skip ? std::log(arc.prob[0]) : 0.0);
        }
    }
    for (int h = 0; h < horizon; ++h) {
        for (std::size_t i = 0; i < arcs.size(); ++i) {
            const auto& arc = arcs[i];
            FeatureRowSet rows;
            rows.step = h;
            rows.state = arc.s;
            rows.action = arc.a;
            rows.next_states = arc.next;
            rows.rows = Matrix::Zero(static_cast<Eigen::Index>(arc.next.size()), dim);
            for (std::size_t j = static_cast<std::size_t>(skip); j < arc.next.size(); ++j) {
                rows.rows(static_cast<Eigen::Index>(j), first_coord[i] + static_cast<int>(j) - skip) = 1.0;
            }
            env.features.set(std::move(rows), Eigen::Map<const Vector>(arc.prob.data(), static_cast<Eigen::Index>(arc.prob.size())));
        }
    }
    env.theta_star.assign(static_cast<std::size_t>(horizon), theta);
    env.b_phi = 1.0;
    env.b_theta = theta.norm();
    env.initial_state = 0;
    env.params = {{"num_states", num_states},
                  {"horizon", horizon},
                  {"variant", text ? "text" : "figure"},
                  {"features", skip ? "reference" : "one_hot"}};
    return env;
}

// ---------------------------------------------------------------------------
// Hard instance

double HardInstanceConstants::success_probability(double x) const {
    return 1.0 / (1.0 + 2.0 * phi * std::exp(-2.0 * x));
}

namespace {

void check_hard_spec(const HardInstanceSpec& spec) {
    const int d = spec.dim;
    if (d < 2) throw DomainError("hard instance: d must be at least 2");
    if (d - 1 > kHardInstanceMaxSignDims) {
        throw UnsupportedSizeError("hard instance: 2^(d-1) actions exceed the explicit action cap (d - 1 <= " +
                                   std::to_string(kHardInstanceMaxSignDims) + ")");
    }
    if (spec.horizon < 4) throw DomainError("hard instance: H must be at least 4");
    const double gap_hi = std::log(2.0) / (4.0 * (d - 1));
    if (!(spec.delta_gap > 0.0 && spec.delta_gap < gap_hi)) {
        throw DomainError("hard instance: Delta must lie in (0, log 2 / (4(d-1))) = (0, " + std::to_string(gap_hi) + ")");
    }
    if (!(spec.epsilon_level > 0.0 && spec.epsilon_level < 1.0 / spec.horizon)) {
        throw DomainError("hard instance: epsilon must lie in (0, 1/H) = (0, " + std::to_string(1.0 / spec.horizon) + ")");
    }
    if (static_cast<int>(spec.perturbation.size()) != d - 1) {
        throw DomainError("hard instance: perturbation must have d - 1 rows");
    }
    for (const auto& row : spec.perturbation) {
        if (static_cast<int>(row.size()) != spec.horizon) throw DomainError("hard instance: perturbation must have H columns");
        for (int u : row) {
            if (u != 1 && u != -1) throw DomainError("hard instance: perturbation entries must be +1 or -1");
        }
    }
    if (!spec.base_theta.empty()) {
        if (static_cast<int>(spec.base_theta.size()) != spec.horizon) throw DomainError("hard instance: base_theta needs H entries");
        for (const auto& th : spec.base_theta) {
            if (th.size() != d) throw DomainError("hard instance: base_theta entries must have dimension d");
            if (th(d - 1) == 0.0) throw DomainError("hard instance: base_theta last coordinate must be nonzero");
        }
    }
}

} // namespace

HardInstanceConstants hard_instance_constants(const HardInstanceSpec& spec) {
    check_hard_spec(spec);
    const double dm1 = spec.dim - 1;
    const double eps = spec.epsilon_level;
    HardInstanceConstants c;
    c.delta_tilde = (1.0 / (1.0 + (1.0 - eps) / eps * std::exp(-4.0 * dm1 * spec.delta_gap)) - eps) / dm1;
    const double top = eps + dm1 * c.delta_tilde;
    c.phi = 0.5 * std::sqrt((1.0 - eps) / eps * (1.0 - top) / top);
    return c;
}

std::vector<int> hard_instance_action_signs(ActionId a, int sign_dims) {
    std::vector<int> signs(static_cast<std::size_t>(sign_dims));
    for (int i = 0; i < sign_dims; ++i) signs[static_cast<std::size_t>(i)] = (a >> i) & 1 ? 1 : -1;
    return signs;
}

ActionId hard_instance_action_id(std::span<const int> signs) {
    ActionId a = 0;
    for (std::size_t i = 0; i < signs.size(); ++i) {
        if (signs[i] > 0) a |= ActionId{1} << i;
    }
    return a;
}

MnlMdp make_hard_instance(const HardInstanceSpec& spec) {
    const HardInstanceConstants c = hard_instance_constants(spec);
    const int d = spec.dim;
    const int dm1 = d - 1;
    const int horizon = spec.horizon;
    const int num_states = 2 * horizon + 1;
    const StateId absorbing = 2 * horizon;
    const int num_actions = 1 << dm1;
    const double root_gap = std::sqrt(spec.delta_gap);
    const double log_phi = std::log(c.phi);

    MnlMdp env;
    env.name = "hard_instance";
    env.num_states = num_states;
    env.num_actions = num_actions;
    env.horizon = horizon;
    env.dim = d;
    env.rewards = Matrix::Zero(num_states, num_actions);
    env.rewards.row(absorbing).setOnes();
    env.features = FeatureMap(horizon, num_states, num_actions, d);
    env.initial_state = 0;

    double b_phi = 0.0;
    for (int h = 0; h < horizon; ++h) {
        ParamVector base = ParamVector::Unit(d, d - 1);
        if (!spec.base_theta.empty()) base = spec.base_theta[static_cast<std::size_t>(h)];
        ParamVector truth = base;
        for (int i = 0; i < dm1; ++i) truth(i) += root_gap * spec.perturbation[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)];
        env.theta_star.push_back(truth);

        const StateId first = 2 * h;
        const std::vector<StateId> next = h + 1 < horizon
                                              ? std::vector<StateId>{absorbing, 2 * h + 2, 2 * h + 3}
                                              : std::vector<StateId>{absorbing, first, first + 1};
        const double tail = base(d - 1);
        for (ActionId a = 0; a < num_actions; ++a) {
            const auto signs = hard_instance_action_signs(a, dm1);
            Vector phi_a(d);
            double dot = 0.0;
            for (int i = 0; i < dm1; ++i) {
                phi_a(i) = root_gap * signs[static_cast<std::size_t>(i)];
                dot += phi_a(i) * base(i);
            }
            phi_a(d - 1) = -dot / tail - log_phi / (2.0 * tail);
            b_phi = std::max(b_phi, phi_a.norm());

            Matrix rows(3, d);
            rows.row(0) = phi_a.transpose();
            rows.row(1) = -phi_a.transpose();
            rows.row(2) = -phi_a.transpose();
            for (StateId s : {first, first + 1}) {
                env.features.set(FeatureRowSet{h, s, a, next, rows});
            }
            env.features.set(FeatureRowSet{h, absorbing, a, {absorbing}, Matrix::Zero(1, d)});
        }
    }
    env.b_phi = b_phi;
    env.b_theta = 0.0;
    for (const auto& th : env.theta_star) env.b_theta = std::max(env.b_theta, th.norm());

    // The construction must realize p(Delta * <sign(u_h), sign(a)>) exactly.
    constexpr double tol = 1e-9;
    for (int h = 0; h < horizon; ++h) {
        for (ActionId a = 0; a < num_actions; ++a) {
            const auto signs = hard_instance_action_signs(a, dm1);
            int agreement = 0;
            for (int i = 0; i < dm1; ++i) agreement += signs[static_cast<std::size_t>(i)] * spec.perturbation[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)];
            const double want = c.success_probability(spec.delta_gap * agreement);
            const double got = env.kernel(h, 2 * h, a).probs(0);
            if (std::abs(got - want) > tol) {
                throw ValidationError("hard instance: success probability " + std::to_string(got) +
                                      " differs from p(x) = " + std::to_string(want));
            }
        }
    }
    const double top = spec.epsilon_level + dm1 * c.delta_tilde;
    if (std::abs(c.success_probability(dm1 * spec.delta_gap) - top) > tol ||
        std::abs(c.success_probability(-dm1 * spec.delta_gap) - spec.epsilon_level) > tol) {
        throw ValidationError("hard instance: p((d-1)Delta) or p(-(d-1)Delta) misses its target");
    }

    nlohmann::json base_json = nlohmann::json::array();
    for (const auto& th : spec.base_theta) base_json.push_back(std::vector<double>(th.data(), th.data() + th.size()));
    env.params = {{"d", d},
                  {"horizon", horizon},
                  {"delta_gap", spec.delta_gap},
                  {"epsilon_level", spec.epsilon_level},
                  {"perturbation", spec.perturbation},
                  {"base_theta", base_json},
                  {"delta_tilde", c.delta_tilde},
                  {"phi", c.phi}};
    return env;
}

// ---------------------------------------------------------------------------
// Dynamic programming

namespace {

double expected_next(const CategoricalDist& dist, const Vector& v_next) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dist.support.size(); ++j) acc += dist.probs(static_cast<Eigen::Index>(j)) * v_next(dist.support[j]);
    return acc;
}

} // namespace

ValueTable optimal_values(const MnlMdp& env) {
    ValueTable t;
    t.v.assign(static_cast<std::size_t>(env.horizon) + 1, Vector::Zero(env.num_states));
    t.q.assign(static_cast<std::size_t>(env.horizon), Matrix::Zero(env.num_states, env.num_actions));
    for (int h = env.horizon - 1; h >= 0; --h) {
        const auto hs = static_cast<std::size_t>(h);
        for (StateId s : env.features.states_at(h)) {
            for (ActionId a = 0; a < env.num_actions; ++a) {
                t.q[hs](s, a) = env.rewards(s, a) + expected_next(env.kernel(h, s, a), t.v[hs + 1]);
            }
            t.v[hs](s) = t.q[hs].row(s).maxCoeff();
        }
    }
    return t;
}

std::vector<Vector> evaluate_policy(const MnlMdp& env, const Policy& policy) {
    if (static_cast<int>(policy.size()) != env.horizon) throw DomainError("policy needs one table per step");
    std::vector<Vector> v(static_cast<std::size_t>(env.horizon) + 1, Vector::Zero(env.num_states));
    for (int h = env.horizon - 1; h >= 0; --h) {
        const auto hs = static_cast<std::size_t>(h);
        for (StateId s : env.features.states_at(h)) {
            double acc = 0.0;
            for (ActionId a = 0; a < env.num_actions; ++a) {
                const double w = policy[hs](s, a);
                if (w == 0.0) continue;
                acc += w * (env.rewards(s, a) + expected_next(env.kernel(h, s, a), v[hs + 1]));
            }
            v[hs](s) = acc;
        }
    }
    return v;
}

Policy greedy_policy(const MnlMdp& env, const std::vector<Matrix>& q) {
    Policy pi(static_cast<std::size_t>(env.horizon), Matrix::Zero(env.num_states, env.num_actions));
    for (int h = 0; h < env.horizon; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        for (StateId s : env.features.states_at(h)) {
            Eigen::Index best = 0;
            q[hs].row(s).maxCoeff(&best); // first maximal index
            pi[hs](s, best) = 1.0;
        }
    }
    return pi;
}

} // namespace mnlmdp
