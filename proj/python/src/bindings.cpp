#include "mnlmdp/errors.hpp"
#include "mnlmdp/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mnlmdp;

namespace {

FeatureRowSet make_rows(const Matrix& rows, std::vector<StateId> next_states) {
    FeatureRowSet out;
    out.rows = rows;
    out.next_states = std::move(next_states);
    out.validate();
    return out;
}

RiverSwimVariant parse_variant(const std::string& s) {
    if (s == "text") return RiverSwimVariant::text;
    if (s == "figure") return RiverSwimVariant::figure;
    throw ConfigError("variant: expected \"text\" or \"figure\"");
}

RiverSwimFeatures parse_features(const std::string& s) {
    if (s == "one_hot") return RiverSwimFeatures::one_hot;
    if (s == "reference") return RiverSwimFeatures::reference;
    throw ConfigError("features: expected \"one_hot\" or \"reference\"");
}

py::dict curve_dict(const std::vector<CurvePoint>& curve) {
    std::vector<double> mean, sd, var;
    for (const auto& p : curve) {
        mean.push_back(p.regret_mean);
        sd.push_back(p.regret_std);
        var.push_back(p.variance_mean);
    }
    py::dict d;
    d["regret_mean"] = mean;
    d["regret_std"] = sd;
    d["variance_mean"] = var;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MNL-MDP kernels, the OCEE estimator, environments and the regret harness.";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("softmax", &softmax, py::arg("logits"));
    m.def("log_sum_exp", py::overload_cast<const Vector&>(&log_sum_exp), py::arg("logits"));
    m.def("sigma_squared", &sigma_squared_from_probs, py::arg("probs"),
          "max over x in [-1,1]^m of x^T (diag(p) - pp^T) x.");
    m.def("hessian", &hessian_from_probs, py::arg("probs"));
    m.def(
        "nll_gradient",
        [](const Matrix& rows, std::vector<StateId> next_states, StateId observed, const Vector& theta) {
            return nll_gradient(make_rows(rows, std::move(next_states)), observed, theta);
        },
        py::arg("rows"), py::arg("next_states"), py::arg("observed"), py::arg("theta"));

    py::class_<ConfidenceParams>(m, "ConfidenceParams")
        .def(py::init(&ConfidenceParams::make), py::arg("delta"), py::arg("dim"), py::arg("b_phi"), py::arg("b_theta"))
        .def_readonly("delta", &ConfidenceParams::delta)
        .def_readonly("dim", &ConfidenceParams::dim)
        .def_readonly("b_phi", &ConfidenceParams::b_phi)
        .def_readonly("b_theta", &ConfidenceParams::b_theta)
        .def_readonly("ridge", &ConfidenceParams::ridge)
        .def_readonly("learning_rate", &ConfidenceParams::learning_rate)
        .def_readonly("c_phi_theta", &ConfidenceParams::c_phi_theta)
        .def("beta", [](const ConfidenceParams& p, std::uint64_t k) { return beta_radius(k, p); }, py::arg("k"));

    py::class_<OceeState>(m, "Ocee")
        .def(py::init(&ocee_init), py::arg("params"))
        .def(
            "update",
            [](OceeState& s, const Matrix& rows, std::vector<StateId> next_states, StateId observed,
               const ConfidenceParams& p) { return ocee_update(s, make_rows(rows, std::move(next_states)), observed, p); },
            py::arg("rows"), py::arg("next_states"), py::arg("observed"), py::arg("params"))
        .def("contains", &ellipsoid_contains, py::arg("theta"), py::arg("beta"))
        .def_readonly("estimate", &OceeState::estimate)
        .def_readonly("theta_online", &OceeState::theta_online)
        .def_readonly("info_matrix", &OceeState::info_matrix)
        .def_readonly("info_inverse", &OceeState::info_inverse)
        .def_readonly("samples_seen", &OceeState::samples_seen)
        .def("to_json", [](const OceeState& s) { return to_json(s).dump(); })
        .def_static("from_json", [](const std::string& doc) { return ocee_state_from_json(nlohmann::json::parse(doc)); });

    m.def("project_h_norm", &project_h_norm, py::arg("theta"), py::arg("info_matrix"), py::arg("b_theta"));

    py::class_<ValueTable>(m, "ValueTable")
        .def_readonly("v", &ValueTable::v)
        .def_readonly("q", &ValueTable::q);

    py::class_<MnlMdp>(m, "Env")
        .def_readonly("name", &MnlMdp::name)
        .def_readonly("num_states", &MnlMdp::num_states)
        .def_readonly("num_actions", &MnlMdp::num_actions)
        .def_readonly("horizon", &MnlMdp::horizon)
        .def_readonly("dim", &MnlMdp::dim)
        .def_readonly("rewards", &MnlMdp::rewards)
        .def_readonly("theta_star", &MnlMdp::theta_star)
        .def_readonly("b_phi", &MnlMdp::b_phi)
        .def_readonly("b_theta", &MnlMdp::b_theta)
        .def_readonly("initial_state", &MnlMdp::initial_state)
        .def(
            "kernel",
            [](const MnlMdp& e, int step, StateId s, ActionId a) {
                auto d = e.kernel(step, s, a);
                return py::make_tuple(d.support, d.probs);
            },
            py::arg("step"), py::arg("state"), py::arg("action"), "(next_states, probabilities) under theta*.")
        .def("optimal_values", &optimal_values)
        .def("to_json", [](const MnlMdp& e) { return env_to_json(e).dump(); })
        .def(
            "kappa",
            [](const MnlMdp& e, std::size_t samples, std::uint64_t seed) {
                Rng rng = make_stream(seed, 2);
                return kappa_diagnostic(e, samples, rng);
            },
            py::arg("samples") = 256, py::arg("seed") = 0);

    m.def(
        "riverswim",
        [](int num_states, int horizon, const std::string& variant, const std::string& features) {
            return make_riverswim(num_states, horizon, parse_variant(variant), parse_features(features));
        },
        py::arg("num_states") = 4, py::arg("horizon") = 12, py::arg("variant") = "text", py::arg("features") = "one_hot");
    m.def(
        "hard_instance",
        [](int dim, int horizon, double delta_gap, double epsilon_level, std::vector<std::vector<int>> perturbation) {
            HardInstanceSpec spec;
            spec.dim = dim;
            spec.horizon = horizon;
            spec.delta_gap = delta_gap;
            spec.epsilon_level = epsilon_level;
            spec.perturbation = std::move(perturbation);
            return make_hard_instance(spec);
        },
        py::arg("dim"), py::arg("horizon"), py::arg("delta_gap"), py::arg("epsilon_level"), py::arg("perturbation"));
    m.def("load_env", [](const std::string& doc) { return load_env(nlohmann::json::parse(doc)); }, py::arg("doc"));

    m.def(
        "run_experiment",
        [](const std::string& config) {
            ExperimentResult r;
            {
                const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config));
                py::gil_scoped_release release;
                r = run_experiment(cfg);
            }
            py::dict out;
            out["csv"] = episodes_csv(r.runs);
            out["curve"] = curve_dict(r.curve);
            out["summary"] = r.summary.dump();
            return out;
        },
        py::arg("config"));
    m.def("validate_config", [](const std::string& config) {
        ExperimentConfig::from_json(nlohmann::json::parse(config)).validate();
    });
    m.def("sha256_hex", &sha256_hex);

    m.attr("__version__") = MNLMDP_VERSION;
}
