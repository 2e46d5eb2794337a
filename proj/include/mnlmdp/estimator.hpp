#pragma once

// Online-to-confidence-ellipsoid estimator for one step h.
//
// An online Newton step iterate is driven by NLL gradients g; the observed
// information matrix accumulates g g^T on top of a ridge, and the reported
// estimate is the ridge-regularized least-squares fit
//   theta_hat = H^{-1} sum_v g_v g_v^T theta_{v-1},
// which admits a self-normalized radius beta_k in the H-norm.

#include "mnlmdp/mnl_core.hpp"
#include "mnlmdp/types.hpp"

#include <json.hpp>

#include <cstdint>

namespace mnlmdp {

struct ConfidenceParams {
    double delta = 0.1;
    int dim = 1;
    double b_phi = 1.0;
    double b_theta = 1.0;
    double ridge = 0.0;         // b_phi^2 (1 + 4 log(d / delta))
    double learning_rate = 0.0; // (e - 1)(3 + 4 b_phi^2 b_theta^2)
    double c_phi_theta = 0.0;   // (e - 1)(6 + 8 b_phi b_theta + 2 b_phi^2 b_theta^2)
    /// Feed the post-projection iterate into the moment vector instead of theta_{v-1}.
    bool moment_uses_post_update = false;

    /// Derives ridge, learning rate and C from (delta, d, B_phi, B_theta).
    static ConfidenceParams make(double delta, int dim, double b_phi, double b_theta);
};

struct OceeState {
    ParamVector theta_online; // ONS iterate
    Matrix info_matrix;       // ridge * I + sum g g^T
    Matrix info_inverse;      // maintained by rank-one updates
    Vector moment;            // sum g g^T theta_{v-1}
    ParamVector estimate;     // info_inverse * moment
    double ridge = 0.0;
    std::uint64_t samples_seen = 0;
    std::uint32_t rank_one_since_refresh = 0;

    Eigen::Index dim() const noexcept { return theta_online.size(); }
};

/// Number of Sherman-Morrison updates between exact re-inversions.
inline constexpr std::uint32_t kInverseRefreshPeriod = 1024;
inline constexpr double kInverseResidualTolerance = 1e-6;

OceeState ocee_init(const ConfidenceParams& params);

/// One OCEE step on the transition (rows.state, rows.action) -> observed_next.
/// Mutates `state` and returns the new estimate theta_hat.
const ParamVector& ocee_update(OceeState& state, const FeatureRowSet& rows, StateId observed_next,
                               const ConfidenceParams& params);

/// argmin_{|theta|_2 <= b_theta} |theta - theta_tilde|_H^2 via bisection on the
/// multiplier of the ball constraint.
ParamVector project_h_norm(const ParamVector& theta_tilde, const Matrix& info_matrix, double b_theta);

/// Confidence radius after k samples.
double beta_radius(std::uint64_t k, const ConfidenceParams& params);

/// |candidate - theta_hat|_H <= beta (unsquared norm).
bool ellipsoid_contains(const OceeState& state, const ParamVector& candidate, double beta);

/// |x|_A = sqrt(x^T A x).
double weighted_norm(const Vector& x, const Matrix& a);

/// Frobenius norm of info_matrix * info_inverse - I.
double inverse_residual(const OceeState& state);

/// Re-inverts info_matrix from a Cholesky factorization.
void refresh_inverse(OceeState& state);

/// Versioned snapshot; doubles are written in shortest round-trip form, so a
/// load of a save reproduces every bit.
nlohmann::json to_json(const OceeState& state);
OceeState ocee_state_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ConfidenceParams& params);

} // namespace mnlmdp
