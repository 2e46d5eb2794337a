#include "mnlmdp/envs.hpp"

#include "mnlmdp/errors.hpp"

#include <fstream>
#include <string>

namespace mnlmdp {

namespace {

using nlohmann::json;

const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "/" + key, "missing required field");
    return *it;
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
    return j.get<int>();
}

double as_double(const json& j, const std::string& path) {
    if (!j.is_number()) throw ParseError(path, "expected a number");
    return j.get<double>();
}

Vector as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_double(j[i], path + "/" + std::to_string(i));
    return v;
}

Matrix as_matrix(const json& j, Eigen::Index cols, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ParseError(path, "expected a non-empty array of rows");
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        const Vector row = as_vector(j[i], p);
        if (row.size() != cols) throw ParseError(p, "row length " + std::to_string(row.size()) + " != dimension " + std::to_string(cols));
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

MnlMdp load_custom(const json& doc, const std::string& path) {
    MnlMdp env;
    env.name = "custom";
    env.num_states = as_int(field(doc, "num_states", path), path + "/num_states");
    env.num_actions = as_int(field(doc, "num_actions", path), path + "/num_actions");
    env.horizon = as_int(field(doc, "horizon", path), path + "/horizon");
    if (env.num_states < 1 || env.num_actions < 1 || env.horizon < 1) {
        throw ParseError(path, "num_states, num_actions and horizon must be positive");
    }
    env.b_phi = as_double(field(doc, "b_phi", path), path + "/b_phi");
    env.b_theta = as_double(field(doc, "b_theta", path), path + "/b_theta");
    if (doc.contains("initial_state")) env.initial_state = as_int(doc["initial_state"], path + "/initial_state");
    if (doc.contains("name") && doc["name"].is_string()) env.name = doc["name"].get<std::string>();

    const json& thetas = field(doc, "theta_star", path);
    if (!thetas.is_array() || static_cast<int>(thetas.size()) != env.horizon) {
        throw ParseError(path + "/theta_star", "expected one parameter vector per step");
    }
    for (std::size_t h = 0; h < thetas.size(); ++h) {
        env.theta_star.push_back(as_vector(thetas[h], path + "/theta_star/" + std::to_string(h)));
    }
    env.dim = static_cast<int>(env.theta_star.front().size());
    if (env.dim < 1) throw ParseError(path + "/theta_star/0", "empty parameter vector");
    for (std::size_t h = 0; h < env.theta_star.size(); ++h) {
        if (env.theta_star[h].size() != env.dim) throw ParseError(path + "/theta_star/" + std::to_string(h), "dimension differs from step 1");
    }

    env.rewards = Matrix::Zero(env.num_states, env.num_actions);
    const json& rewards = field(doc, "rewards", path);
    if (!rewards.is_array()) throw ParseError(path + "/rewards", "expected an array of [s, a, r]");
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        const std::string p = path + "/rewards/" + std::to_string(i);
        const json& e = rewards[i];
        if (!e.is_array() || e.size() != 3) throw ParseError(p, "expected [s, a, r]");
        const int s = as_int(e[0], p + "/0");
        const int a = as_int(e[1], p + "/1");
        if (s < 0 || s >= env.num_states || a < 0 || a >= env.num_actions) throw ParseError(p, "state or action out of range");
        env.rewards(s, a) = as_double(e[2], p + "/2");
    }

    env.features = FeatureMap(env.horizon, env.num_states, env.num_actions, env.dim);
    const json& steps = field(doc, "steps", path);
    if (!steps.is_array()) throw ParseError(path + "/steps", "expected an array");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string sp = path + "/steps/" + std::to_string(i);
        const int h = as_int(field(steps[i], "h", sp), sp + "/h");
        if (h < 1 || h > env.horizon) throw ParseError(sp + "/h", "step must lie in [1, horizon]");
        const json& entries = field(steps[i], "entries", sp);
        if (!entries.is_array()) throw ParseError(sp + "/entries", "expected an array");
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const std::string ep = sp + "/entries/" + std::to_string(k);
            const json& e = entries[k];
            FeatureRowSet rows;
            rows.step = h - 1;
            rows.state = as_int(field(e, "s", ep), ep + "/s");
            rows.action = as_int(field(e, "a", ep), ep + "/a");
            const json& next = field(e, "next_states", ep);
            if (!next.is_array()) throw ParseError(ep + "/next_states", "expected an array of state ids");
            for (std::size_t n = 0; n < next.size(); ++n) rows.next_states.push_back(as_int(next[n], ep + "/next_states/" + std::to_string(n)));
            rows.rows = as_matrix(field(e, "rows", ep), env.dim, ep + "/rows");
            Vector target;
            if (e.contains("target_probs")) target = as_vector(e["target_probs"], ep + "/target_probs");
            try {
                env.features.set(std::move(rows), std::move(target));
            } catch (const DomainError& err) {
                throw ParseError(ep, err.what());
            }
        }
    }
    return env;
}

RiverSwimVariant parse_variant(const json& params, const std::string& path) {
    const std::string v = params.value("variant", std::string("text"));
    if (v == "text") return RiverSwimVariant::text;
    if (v == "figure") return RiverSwimVariant::figure;
    throw ParseError(path + "/variant", "expected \"text\" or \"figure\"");
}

RiverSwimFeatures parse_features(const json& params, const std::string& path) {
    const std::string v = params.value("features", std::string("one_hot"));
    if (v == "one_hot") return RiverSwimFeatures::one_hot;
    if (v == "reference") return RiverSwimFeatures::reference;
    throw ParseError(path + "/features", "expected \"one_hot\" or \"reference\"");
}

HardInstanceSpec parse_hard_spec(const json& params, const std::string& path) {
    HardInstanceSpec spec;
    spec.dim = as_int(field(params, "d", path), path + "/d");
    spec.horizon = as_int(field(params, "horizon", path), path + "/horizon");
    spec.delta_gap = as_double(field(params, "delta_gap", path), path + "/delta_gap");
    spec.epsilon_level = as_double(field(params, "epsilon_level", path), path + "/epsilon_level");
    if (params.contains("perturbation")) {
        const json& u = params["perturbation"];
        if (!u.is_array()) throw ParseError(path + "/perturbation", "expected a (d-1) x H array");
        for (std::size_t i = 0; i < u.size(); ++i) {
            const std::string p = path + "/perturbation/" + std::to_string(i);
            if (!u[i].is_array()) throw ParseError(p, "expected an array of +-1");
            std::vector<int> row;
            for (std::size_t h = 0; h < u[i].size(); ++h) row.push_back(as_int(u[i][h], p + "/" + std::to_string(h)));
            spec.perturbation.push_back(std::move(row));
        }
    } else {
        // All-positive perturbation when none is given.
        spec.perturbation.assign(static_cast<std::size_t>(std::max(spec.dim - 1, 0)),
                                 std::vector<int>(static_cast<std::size_t>(std::max(spec.horizon, 0)), 1));
    }
    if (params.contains("base_theta")) {
        const json& b = params["base_theta"];
        if (!b.is_array()) throw ParseError(path + "/base_theta", "expected an array of vectors");
        for (std::size_t h = 0; h < b.size(); ++h) spec.base_theta.push_back(as_vector(b[h], path + "/base_theta/" + std::to_string(h)));
    }
    return spec;
}

json matrix_rows(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace

MnlMdp load_env(const json& doc) {
    if (!doc.is_object()) throw ParseError("", "environment document must be an object");
    if (doc.contains("schema_version") && as_int(doc["schema_version"], "/schema_version") != kEnvSchemaVersion) {
        throw ParseError("/schema_version", "unsupported schema version");
    }
    const json& kind_j = field(doc, "kind", "");
    if (!kind_j.is_string()) throw ParseError("/kind", "expected a string");
    const std::string kind = kind_j.get<std::string>();
    const json params = doc.value("params", json::object());

    MnlMdp env;
    try {
        if (kind == "riverswim") {
            env = make_riverswim(as_int(field(params, "num_states", "/params"), "/params/num_states"),
                                 as_int(field(params, "horizon", "/params"), "/params/horizon"),
                                 parse_variant(params, "/params"), parse_features(params, "/params"));
        } else if (kind == "hard_instance") {
            env = make_hard_instance(parse_hard_spec(params, "/params"));
        } else if (kind == "custom") {
            env = load_custom(field(doc, "custom", ""), "/custom");
        } else {
            throw ParseError("/kind", "expected \"riverswim\", \"hard_instance\" or \"custom\"");
        }
    } catch (const DomainError& err) {
        throw ValidationError(err.what());
    }
    env.validate();
    return env;
}

MnlMdp load_env_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open environment file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ParseError("", std::string("invalid JSON in ") + path + ": " + err.what());
    }
    return load_env(doc);
}

json env_to_json(const MnlMdp& env) {
    json rewards = json::array();
    for (StateId s = 0; s < env.num_states; ++s)
        for (ActionId a = 0; a < env.num_actions; ++a)
            if (env.rewards(s, a) != 0.0) rewards.push_back({s, a, env.rewards(s, a)});

    json steps = json::array();
    for (int h = 0; h < env.horizon; ++h) {
        json entries = json::array();
        for (StateId s : env.features.states_at(h)) {
            for (ActionId a = 0; a < env.num_actions; ++a) {
                const auto& rows = env.features.at(h, s, a);
                json e = {{"s", s}, {"a", a}, {"next_states", rows.next_states}, {"rows", matrix_rows(rows.rows)}};
                const Vector& t = env.features.target(h, s, a);
                if (t.size() != 0) e["target_probs"] = std::vector<double>(t.data(), t.data() + t.size());
                entries.push_back(std::move(e));
            }
        }
        steps.push_back({{"h", h + 1}, {"entries", std::move(entries)}});
    }
    json thetas = json::array();
    for (const auto& th : env.theta_star) thetas.push_back(std::vector<double>(th.data(), th.data() + th.size()));

    return {{"schema_version", kEnvSchemaVersion},
            {"kind", "custom"},
            {"params", json::object()},
            {"custom",
             {{"name", env.name},
              {"num_states", env.num_states},
              {"num_actions", env.num_actions},
              {"horizon", env.horizon},
              {"initial_state", env.initial_state},
              {"rewards", std::move(rewards)},
              {"steps", std::move(steps)},
              {"theta_star", std::move(thetas)},
              {"b_phi", env.b_phi},
              {"b_theta", env.b_theta}}}};
}

} // namespace mnlmdp
