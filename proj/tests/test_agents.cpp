#include "mnlmdp/agents.hpp"
#include "mnlmdp/errors.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mnlmdp;

namespace {

/// Estimators whose estimate is theta* and whose information matrix is `scale` I.
std::vector<OceeState> at_truth(const MnlMdp& env, double scale = 10.0) {
    std::vector<OceeState> out;
    for (const auto& th : env.theta_star) {
        OceeState s;
        s.theta_online = th;
        s.estimate = th;
        s.info_matrix = scale * Matrix::Identity(env.dim, env.dim);
        s.info_inverse = Matrix::Identity(env.dim, env.dim) / scale;
        s.moment = s.info_matrix * th;
        s.ridge = scale;
        out.push_back(s);
    }
    return out;
}

/// Estimators trained on a few random transitions, so estimates differ from theta*.
std::vector<OceeState> trained(const MnlMdp& env, int samples, std::uint64_t seed) {
    const auto p = ConfidenceParams::make(0.1, env.dim, env.b_phi, env.b_theta);
    std::vector<OceeState> out(static_cast<std::size_t>(env.horizon), ocee_init(p));
    Rng rng(seed);
    for (int i = 0; i < samples; ++i) {
        const int h = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.horizon)));
        const auto states = env.features.states_at(h);
        const StateId s = states[uniform_index(rng, states.size())];
        const ActionId a = static_cast<ActionId>(uniform_index(rng, static_cast<std::size_t>(env.num_actions)));
        ocee_update(out[static_cast<std::size_t>(h)], env.features.at(h, s, a), sample_next_state(env.kernel(h, s, a), rng), p);
    }
    return out;
}

QTable hand_table(std::vector<std::vector<double>> row) {
    QTable q;
    Matrix m(1, static_cast<Eigen::Index>(row.front().size()));
    for (std::size_t a = 0; a < row.front().size(); ++a) m(0, static_cast<Eigen::Index>(a)) = row.front()[a];
    q.values = {m};
    q.raw = q.values;
    q.state_values = {Vector::Zero(1), Vector::Zero(1)};
    q.present = {{1}};
    return q;
}

} // namespace

TEST_SUITE("compute_q_hat") {
    TEST_CASE("beta = 0 at theta* is the Bellman backup") {
        for (auto env : {make_riverswim(4, 12), make_riverswim(5, 6, RiverSwimVariant::figure)}) {
            const auto opt = optimal_values(env);
            const auto q = compute_q_hat(EnvView(env), at_truth(env), 0.0);
            for (int h = 0; h < env.horizon; ++h) {
                CHECK((q.values[static_cast<std::size_t>(h)] - opt.q[static_cast<std::size_t>(h)]).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }

    TEST_CASE("RiverSwim S = 4, H = 3 against the DP oracle") {
        const auto env = make_riverswim(4, 3);
        const auto q = compute_q_hat(EnvView(env), at_truth(env), 0.0);
        const auto v = oracle::values(env, nullptr);
        for (int h = 0; h < 3; ++h)
            for (StateId s = 0; s < 4; ++s) CHECK(std::abs(q.state_values[static_cast<std::size_t>(h)](s) - v[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)]) < 1e-9);
    }

    TEST_CASE("last step equals the reward for any beta") {
        const auto env = make_riverswim(4, 5);
        const auto est = trained(env, 300, 1);
        for (double beta : {0.0, 1.0, 50.0}) {
            const auto q = compute_q_hat(EnvView(env), est, beta);
            CHECK((q.values.back() - env.rewards).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    TEST_CASE("range and monotonicity in beta") {
        const auto env = make_riverswim(4, 8);
        const auto est = trained(env, 500, 2);
        QTable prev = compute_q_hat(EnvView(env), est, 0.0);
        for (double beta : {0.01, 0.1, 0.5, 2.0, 20.0}) {
            const QTable q = compute_q_hat(EnvView(env), est, beta);
            for (int h = 0; h < env.horizon; ++h) {
                const auto hs = static_cast<std::size_t>(h);
                CHECK(q.values[hs].minCoeff() >= 0.0);
                CHECK(q.values[hs].maxCoeff() <= env.horizon);
                CHECK(((q.raw[hs] - prev.raw[hs]).array() >= -1e-12).all());
                CHECK(((q.values[hs] - prev.values[hs]).array() >= -1e-12).all());
            }
            prev = q;
        }
    }

    TEST_CASE("bonus terms by hand on one step") {
        // Two steps so the second step's values feed the bonus of the first.
        const auto env = make_riverswim(3, 2);
        auto est = trained(env, 200, 3);
        const double beta = 0.3;
        const auto q = compute_q_hat(EnvView(env), est, beta);
        const auto& rows = env.features.at(0, 1, 1);
        const Vector p = oracle::softmax_ld(rows.rows * est[0].estimate);
        Vector v(3);
        for (int j = 0; j < 3; ++j) v(j) = q.state_values[1](rows.next_states[static_cast<std::size_t>(j)]);
        const Matrix lam = Matrix(p.asDiagonal()) - p * p.transpose();
        const Vector u = rows.rows.transpose() * lam * v;
        const Matrix& inv = est[0].info_inverse;
        double max_row = 0.0;
        for (int j = 0; j < 3; ++j) max_row = std::max(max_row, rows.rows.row(j).dot(inv * rows.rows.row(j).transpose()));
        const double want = env.rewards(1, 1) + p.dot(v) + beta * std::sqrt(u.dot(inv * u)) + beta * beta * v.maxCoeff() * max_row;
        CHECK(std::abs(q.raw[0](1, 1) - want) < 1e-12);
    }

    TEST_CASE("missing estimators") {
        const auto env = make_riverswim(3, 4);
        auto est = at_truth(env);
        est.pop_back();
        CHECK_THROWS_AS(compute_q_hat(EnvView(env), est, 1.0), ConfigError);
        std::vector<Matrix> grams(3, Matrix::Identity(env.dim, env.dim));
        CHECK_THROWS_AS(first_order_ucb_q(EnvView(env), at_truth(env), grams, 1.0, 1.0), ConfigError);
    }
}

TEST_SUITE("first_order_ucb_q") {
    TEST_CASE("zero bonus at theta* is the Bellman backup") {
        const auto env = make_riverswim(4, 12);
        const auto opt = optimal_values(env);
        std::vector<Matrix> grams(12, Matrix::Identity(env.dim, env.dim));
        const auto q = first_order_ucb_q(EnvView(env), at_truth(env), grams, 0.0, 5.0);
        for (int h = 0; h < 12; ++h) CHECK((q.values[static_cast<std::size_t>(h)] - opt.q[static_cast<std::size_t>(h)]).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("bonus scale is monotone") {
        const auto env = make_riverswim(4, 6);
        const auto est = trained(env, 300, 4);
        std::vector<Matrix> grams(6, Matrix::Identity(env.dim, env.dim) * 3.0);
        QTable prev = first_order_ucb_q(EnvView(env), est, grams, 0.0, 1.0);
        for (double scale : {0.1, 1.0, 10.0}) {
            const QTable q = first_order_ucb_q(EnvView(env), est, grams, scale, 1.0);
            for (int h = 0; h < 6; ++h) CHECK(((q.raw[static_cast<std::size_t>(h)] - prev.raw[static_cast<std::size_t>(h)]).array() >= -1e-12).all());
            prev = q;
        }
    }

    TEST_CASE("identity Gram, single row c e_1") {
        // One step, one state, one action, singleton reachable set.
        MnlMdp env;
        env.name = "tiny";
        env.num_states = 1;
        env.num_actions = 1;
        env.horizon = 1;
        env.dim = 2;
        env.rewards = Matrix::Constant(1, 1, 0.2);
        env.features = FeatureMap(1, 1, 1, 2);
        const double c = 0.7;
        Matrix rows = Matrix::Zero(1, 2);
        rows(0, 0) = c;
        env.features.set(FeatureRowSet{0, 0, 0, {0}, rows});
        env.theta_star = {Vector::Zero(2)};
        env.b_phi = 1.0;
        env.b_theta = 1.0;
        std::vector<Matrix> grams{Matrix::Identity(2, 2)};
        const double scale = 3.0, beta = 0.05;
        const auto q = first_order_ucb_q(EnvView(env), at_truth(env), grams, scale, beta);
        CHECK(std::abs(q.raw[0](0, 0) - (0.2 + scale * beta * c)) < 1e-15);
    }
}

TEST_SUITE("select_action") {
    TEST_CASE("single action, ties, dominance, scaling") {
        CHECK(select_action(hand_table({{0.4}}), 0, 0) == 0);
        CHECK(select_action(hand_table({{0.5, 0.9, 0.9}}), 0, 0) == 1);
        CHECK(select_action(hand_table({{0.3, 0.3}}), 0, 0) == 0);
        CHECK(select_action(hand_table({{0.1, 0.9}}), 0, 0) == 1);
        oracle::Gen gen(5);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> row;
            for (int a = 0; a < 5; ++a) row.push_back(gen.uniform(0, 3));
            const ActionId a = select_action(hand_table({row}), 0, 0);
            const double k = gen.uniform(0.01, 100);
            for (auto& x : row) x *= k;
            CHECK(select_action(hand_table({row}), 0, 0) == a);
        }
    }

    TEST_CASE("unknown state or step") {
        const auto q = hand_table({{0.1, 0.2}});
        CHECK_THROWS_AS(select_action(q, 0, 1), DomainError);
        CHECK_THROWS_AS(select_action(q, 1, 0), DomainError);
    }
}

TEST_SUITE("epsilon_greedy_step") {
    TEST_CASE("epsilon = 0 is greedy") {
        const auto q = hand_table({{0.1, 0.7, 0.3}});
        Rng rng(1);
        for (int i = 0; i < 1000; ++i) CHECK(epsilon_greedy_step(q, 0, 0, 0.0, rng) == 1);
    }

    TEST_CASE("epsilon = 1 is uniform (chi-square)") {
        const auto q = hand_table({{0.1, 0.7, 0.3, 0.2}});
        Rng rng(2);
        std::vector<int> counts(4, 0);
        const int n = 10000;
        for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(epsilon_greedy_step(q, 0, 0, 1.0, rng))];
        double chi2 = 0.0;
        for (int c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
        // 3 degrees of freedom: P(chi2 > 16.27) = 0.001.
        CHECK(chi2 < 16.27);
    }

    TEST_CASE("seeded replay") {
        const auto q = hand_table({{0.1, 0.7, 0.3}});
        Rng a(3), b(3);
        for (int i = 0; i < 1000; ++i) CHECK(epsilon_greedy_step(q, 0, 0, 0.4, a) == epsilon_greedy_step(q, 0, 0, 0.4, b));
    }
}

TEST_SUITE("agent") {
    TEST_CASE("configuration checks") {
        const auto env = make_riverswim(3, 3);
        AgentConfig cfg;
        cfg.delta = 1.5;
        CHECK_THROWS_AS(Agent(env, cfg), ConfigError);
        cfg.delta = 0.1;
        cfg.kind = AgentKind::epsilon_greedy;
        cfg.epsilon = 2.0;
        CHECK_THROWS_AS(Agent(env, cfg), ConfigError);
        cfg.kind = AgentKind::oracle;
        cfg.epsilon = 0.1;
        CHECK_THROWS_AS(Agent(env, cfg), ConfigError);
        CHECK(parse_agent_kind("first_order_ucb") == AgentKind::first_order_ucb);
        CHECK(to_string(AgentKind::epsilon_greedy) == "epsilon_greedy");
        CHECK_THROWS_AS(parse_agent_kind("greedy"), ConfigError);
    }

    TEST_CASE("plans use the radius of the completed episode count") {
        const auto env = make_riverswim(3, 3);
        AgentConfig cfg;
        cfg.beta_scale = 0.5;
        Agent agent(env, cfg);
        agent.begin_episode();
        CHECK(agent.current_beta() == 0.5 * beta_radius(0, agent.confidence()));
        agent.begin_episode();
        CHECK(agent.current_beta() == 0.5 * beta_radius(1, agent.confidence()));
        CHECK(agent.episodes_started() == 2);
    }

    TEST_CASE("beta = 0 at theta* reproduces the optimal actions") {
        const auto env = make_riverswim(4, 12);
        const auto opt = optimal_values(env);
        for (AgentKind kind : {AgentKind::va_mnl, AgentKind::first_order_ucb}) {
            AgentConfig cfg;
            cfg.kind = kind;
            cfg.beta_scale = 0.0;
            Agent agent(env, cfg);
            agent.estimators() = at_truth(env);
            agent.begin_episode();
            for (int h = 0; h < env.horizon; ++h)
                for (StateId s = 0; s < env.num_states; ++s) {
                    const auto row = opt.q[static_cast<std::size_t>(h)].row(s);
                    Eigen::Index best = 0;
                    row.maxCoeff(&best);
                    int ties = 0;
                    for (ActionId a = 0; a < env.num_actions; ++a) ties += std::abs(row(a) - row(best)) < 1e-12;
                    if (ties == 1) {
                        Rng rng(0);
                        CHECK(agent.act(h, s, rng) == best);
                    }
                }
        }
    }

    TEST_CASE("epsilon-greedy deployed policy mixes in the uniform action") {
        const auto env = make_riverswim(3, 2);
        AgentConfig cfg;
        cfg.kind = AgentKind::epsilon_greedy;
        cfg.epsilon = 0.2;
        Agent agent(env, cfg);
        agent.begin_episode();
        const Policy pi = agent.policy();
        for (const auto& m : pi)
            for (StateId s = 0; s < 3; ++s) {
                CHECK(std::abs(m.row(s).sum() - 1.0) < 1e-15);
                CHECK(m.row(s).minCoeff() == doctest::Approx(0.1));
            }
    }

    TEST_CASE("oracle agent follows Q*") {
        const auto env = make_riverswim(4, 6);
        const auto opt = optimal_values(env);
        Agent agent = Agent::oracle(env, opt);
        agent.begin_episode();
        const auto v = evaluate_policy(env, agent.policy());
        CHECK(std::abs(v[0](0) - opt.v[0](0)) < 1e-12);
    }
}
