#include "mnlmdp/estimator.hpp"

#include "mnlmdp/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mnlmdp {

namespace {

constexpr double kEMinusOne = std::numbers::e - 1.0;
constexpr int kSnapshotVersion = 1;

} // namespace

ConfidenceParams ConfidenceParams::make(double delta, int dim, double b_phi, double b_theta) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (dim < 1) throw DomainError("dimension must be positive");
    if (!(b_phi > 0.0) || !(b_theta > 0.0)) throw DomainError("B_phi and B_theta must be positive");
    ConfidenceParams p;
    p.delta = delta;
    p.dim = dim;
    p.b_phi = b_phi;
    p.b_theta = b_theta;
    const double phi2 = b_phi * b_phi;
    const double prod = b_phi * b_theta;
    p.ridge = phi2 * (1.0 + 4.0 * std::log(static_cast<double>(dim) / delta));
    p.learning_rate = kEMinusOne * (3.0 + 4.0 * prod * prod);
    p.c_phi_theta = kEMinusOne * (6.0 + 8.0 * prod + 2.0 * prod * prod);
    return p;
}

OceeState ocee_init(const ConfidenceParams& params) {
    const Eigen::Index d = params.dim;
    OceeState s;
    s.theta_online = ParamVector::Zero(d);
    s.info_matrix = params.ridge * Matrix::Identity(d, d);
    s.info_inverse = (1.0 / params.ridge) * Matrix::Identity(d, d);
    s.moment = Vector::Zero(d);
    s.estimate = ParamVector::Zero(d);
    s.ridge = params.ridge;
    return s;
}

double weighted_norm(const Vector& x, const Matrix& a) {
    return std::sqrt(std::max(0.0, x.dot(a * x)));
}

double inverse_residual(const OceeState& state) {
    const Eigen::Index d = state.dim();
    return (state.info_matrix * state.info_inverse - Matrix::Identity(d, d)).norm();
}

void refresh_inverse(OceeState& state) {
    const Eigen::Index d = state.dim();
    Eigen::LLT<Matrix> llt(state.info_matrix);
    if (llt.info() != Eigen::Success) throw DomainError("information matrix lost positive definiteness");
    state.info_inverse = llt.solve(Matrix::Identity(d, d));
    state.info_inverse = 0.5 * (state.info_inverse + state.info_inverse.transpose()).eval();
    state.rank_one_since_refresh = 0;
}

const ParamVector& ocee_update(OceeState& state, const FeatureRowSet& rows, StateId observed_next,
                               const ConfidenceParams& params) {
    if (rows.dim() != state.dim()) {
        throw DomainError("OCEE update: feature dimension " + std::to_string(rows.dim()) +
                          " vs estimator dimension " + std::to_string(state.dim()));
    }
    ++state.samples_seen;

    const Vector g = nll_gradient(rows, observed_next, state.theta_online);
    if (g.squaredNorm() == 0.0) return state.estimate;

    // Sherman-Morrison: (A + g g^T)^{-1} = A^{-1} - A^{-1} g g^T A^{-1} / (1 + g^T A^{-1} g).
    state.info_matrix.noalias() += g * g.transpose();
    const Vector ag = state.info_inverse * g;
    state.info_inverse.noalias() -= (ag * ag.transpose()) / (1.0 + g.dot(ag));
    if (++state.rank_one_since_refresh >= kInverseRefreshPeriod) refresh_inverse(state);

    const ParamVector previous = state.theta_online;
    const ParamVector newton = previous - params.learning_rate * (state.info_inverse * g);
    state.theta_online = project_h_norm(newton, state.info_matrix, params.b_theta);

    const ParamVector& anchor = params.moment_uses_post_update ? state.theta_online : previous;
    state.moment.noalias() += g * g.dot(anchor);
    state.estimate = state.info_inverse * state.moment;
    return state.estimate;
}

ParamVector project_h_norm(const ParamVector& theta_tilde, const Matrix& info_matrix, double b_theta) {
    const Eigen::Index d = theta_tilde.size();
    if (info_matrix.rows() != d || info_matrix.cols() != d) {
        throw DomainError("projection: information matrix shape does not match parameter");
    }
    if (!(b_theta > 0.0)) throw DomainError("projection: radius must be positive");
    Eigen::LLT<Matrix> check(info_matrix);
    if (check.info() != Eigen::Success) throw DomainError("projection: information matrix is not positive definite");

    if (theta_tilde.norm() <= b_theta) return theta_tilde;

    const Vector target = info_matrix * theta_tilde;
    const auto solve_at = [&](double lambda) -> ParamVector {
        Matrix shifted = info_matrix;
        shifted.diagonal().array() += lambda;
        return Eigen::LLT<Matrix>(shifted).solve(target);
    };

    // |theta(lambda)| strictly decreases in lambda; bracket the root, then bisect.
    double lo = 0.0;
    double hi = std::max(1.0, info_matrix.diagonal().maxCoeff());
    ParamVector at_hi = solve_at(hi);
    while (at_hi.norm() > b_theta) {
        lo = hi;
        hi *= 2.0;
        at_hi = solve_at(hi);
    }
    for (int it = 0; it < 200 && b_theta - at_hi.norm() > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        ParamVector at_mid = solve_at(mid);
        if (at_mid.norm() > b_theta) {
            lo = mid;
        } else {
            hi = mid;
            at_hi = std::move(at_mid);
        }
    }
    return at_hi;
}

double beta_radius(std::uint64_t k, const ConfidenceParams& p) {
    const double d = p.dim;
    const double eps = p.ridge;
    const double eta = p.learning_rate;
    const double c = p.c_phi_theta;
    const double phi2theta2 = p.b_phi * p.b_phi * p.b_theta * p.b_theta;
    const double growth = std::max(0.0, std::log((static_cast<double>(k) + 1.0) / d));
    const double gamma = 4.0 * c * p.b_theta * p.b_theta * eps / eta + 2.0 * d * c * eta * growth +
                         (16.0 * c * phi2theta2 / eta + 4.0 * c * c) * std::log(1.0 / p.delta) +
                         32.0 * phi2theta2 * std::log(d / p.delta);
    const double root_eps_b = std::sqrt(eps) * p.b_theta;
    return root_eps_b + std::sqrt(eps * p.b_theta * p.b_theta + 4.0 * gamma);
}

bool ellipsoid_contains(const OceeState& state, const ParamVector& candidate, double beta) {
    if (candidate.size() != state.dim()) throw DomainError("ellipsoid_contains: dimension mismatch");
    return weighted_norm(candidate - state.estimate, state.info_matrix) <= beta;
}

namespace {

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json mat_json(const Matrix& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Vector vec_from(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(path + "/" + std::to_string(i), "expected a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix mat_from(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw ParseError(path, "expected {rows, cols, data}");
    }
    const auto r = j["rows"].get<Eigen::Index>();
    const auto c = j["cols"].get<Eigen::Index>();
    const Vector flat = vec_from(j["data"], path + "/data");
    if (flat.size() != r * c) throw ParseError(path + "/data", "length does not equal rows*cols");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = flat(i * c + k);
    return m;
}

} // namespace

nlohmann::json to_json(const OceeState& s) {
    return {{"version", kSnapshotVersion},
            {"theta_online", vec_json(s.theta_online)},
            {"info_matrix", mat_json(s.info_matrix)},
            {"info_inverse", mat_json(s.info_inverse)},
            {"moment", vec_json(s.moment)},
            {"ridge", s.ridge},
            {"samples_seen", s.samples_seen},
            {"estimate", vec_json(s.estimate)},
            {"rank_one_since_refresh", s.rank_one_since_refresh}};
}

OceeState ocee_state_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("", "snapshot must be an object");
    if (doc.value("version", -1) != kSnapshotVersion) throw ParseError("/version", "unsupported snapshot version");
    for (const char* key : {"theta_online", "info_matrix", "info_inverse", "moment", "ridge", "samples_seen", "estimate"}) {
        if (!doc.contains(key)) throw ParseError(std::string("/") + key, "missing field");
    }
    OceeState s;
    s.theta_online = vec_from(doc["theta_online"], "/theta_online");
    s.info_matrix = mat_from(doc["info_matrix"], "/info_matrix");
    s.info_inverse = mat_from(doc["info_inverse"], "/info_inverse");
    s.moment = vec_from(doc["moment"], "/moment");
    s.ridge = doc["ridge"].get<double>();
    s.samples_seen = doc["samples_seen"].get<std::uint64_t>();
    s.estimate = vec_from(doc["estimate"], "/estimate");
    s.rank_one_since_refresh = doc.value("rank_one_since_refresh", 0u);
    const Eigen::Index d = s.theta_online.size();
    if (s.info_matrix.rows() != d || s.info_matrix.cols() != d || s.info_inverse.rows() != d ||
        s.info_inverse.cols() != d || s.moment.size() != d || s.estimate.size() != d) {
        throw ParseError("", "snapshot field dimensions disagree");
    }
    return s;
}

nlohmann::json to_json(const ConfidenceParams& p) {
    return {{"delta", p.delta},       {"dim", p.dim},
            {"b_phi", p.b_phi},       {"b_theta", p.b_theta},
            {"ridge", p.ridge},       {"learning_rate", p.learning_rate},
            {"c_phi_theta", p.c_phi_theta}, {"moment_uses_post_update", p.moment_uses_post_update}};
}

} // namespace mnlmdp
