#pragma once

// Multinomial-logit kernel math restricted to a reachable set.
//
// Every function works on the m x d block of feature rows for one (step, state,
// action); nothing here ever materializes a |S| x |S| object.

#include "mnlmdp/types.hpp"

#include <span>
#include <vector>

namespace mnlmdp {

/// Reachable next states of one (step, state, action) and their feature rows.
/// Row j is e_{next_states[j]}^T Phi(state, action).
struct FeatureRowSet {
    int step = 0; // 0-based
    StateId state = 0;
    ActionId action = 0;
    std::vector<StateId> next_states;
    Matrix rows; // next_states.size() x d

    std::size_t size() const noexcept { return next_states.size(); }
    Eigen::Index dim() const noexcept { return rows.cols(); }

    /// Slot of `s` in next_states, or -1.
    int index_of(StateId s) const noexcept;

    /// Structural invariants: non-empty, duplicate-free, row count matches.
    void validate() const;
};

struct CategoricalDist {
    std::vector<StateId> support;
    Vector probs;
};

/// Largest reachable set sigma_squared will enumerate (2^20 subsets).
inline constexpr std::size_t kSigmaSubsetCap = 20;

double log_sum_exp(std::span<const double> logits);
double log_sum_exp(const Vector& logits);

/// rows * theta, with the dimension check shared by everything below.
Vector logits(const FeatureRowSet& rows, const ParamVector& theta);

/// Softmax of `logits`, shifted by their log-sum-exp.
Vector softmax(const Vector& logits);

CategoricalDist transition_dist(const FeatureRowSet& rows, const ParamVector& theta);

/// Gradient of the log-sum function in logit space; equals the transition probabilities.
Vector grad_log_sum_exp(const FeatureRowSet& rows, const ParamVector& theta);

/// diag(p) - p p^T, the m x m Hessian of the log-sum function in logit space.
Matrix hessian_log_sum_exp(const FeatureRowSet& rows, const ParamVector& theta);
Matrix hessian_from_probs(const Vector& probs);

/// Gradient in theta of -log P(observed_next): rows^T (p - onehot(observed_next)).
Vector nll_gradient(const FeatureRowSet& rows, StateId observed_next, const ParamVector& theta);

double nll_value(const FeatureRowSet& rows, StateId observed_next, const ParamVector& theta);

/// max over x in [-1,1]^m of x^T (diag(p) - pp^T) x, evaluated as
/// 1 - min_A (2 P(A) - 1)^2 over all subsets A of the reachable set.
double sigma_squared(const FeatureRowSet& rows, const ParamVector& theta);
double sigma_squared_from_probs(const Vector& probs);

StateId sample_next_state(const CategoricalDist& dist, Rng& rng);

} // namespace mnlmdp
