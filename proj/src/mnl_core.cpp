#include "mnlmdp/mnl_core.hpp"

#include "mnlmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mnlmdp {

int FeatureRowSet::index_of(StateId s) const noexcept {
    for (std::size_t j = 0; j < next_states.size(); ++j) {
        if (next_states[j] == s) return static_cast<int>(j);
    }
    return -1;
}

void FeatureRowSet::validate() const {
    if (next_states.empty()) throw DomainError("feature row set has an empty reachable set");
    if (static_cast<std::size_t>(rows.rows()) != next_states.size()) {
        throw DomainError("feature row set: " + std::to_string(rows.rows()) + " rows for " +
                          std::to_string(next_states.size()) + " next states");
    }
    auto sorted = next_states;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DomainError("feature row set has duplicate next states");
    }
}

double log_sum_exp(std::span<const double> logits) {
    if (logits.empty()) throw DomainError("log_sum_exp of an empty vector");
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : logits) {
        if (!std::isfinite(x)) throw DomainError("log_sum_exp: non-finite logit");
        hi = std::max(hi, x);
    }
    double acc = 0.0;
    for (double x : logits) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

double log_sum_exp(const Vector& logits) {
    return log_sum_exp(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())));
}

Vector logits(const FeatureRowSet& rows, const ParamVector& theta) {
    if (rows.dim() != theta.size()) {
        throw DomainError("feature dimension " + std::to_string(rows.dim()) +
                          " does not match parameter dimension " + std::to_string(theta.size()));
    }
    if (rows.size() == 0 || static_cast<std::size_t>(rows.rows.rows()) != rows.size()) {
        throw DomainError("malformed feature row set");
    }
    return rows.rows * theta;
}

Vector softmax(const Vector& z) {
    const double lse = log_sum_exp(z);
    return (z.array() - lse).exp().matrix();
}

CategoricalDist transition_dist(const FeatureRowSet& rows, const ParamVector& theta) {
    return {rows.next_states, softmax(logits(rows, theta))};
}

Vector grad_log_sum_exp(const FeatureRowSet& rows, const ParamVector& theta) {
    return softmax(logits(rows, theta));
}

Matrix hessian_from_probs(const Vector& p) {
    Matrix h = -p * p.transpose();
    h.diagonal() += p;
    return h;
}

Matrix hessian_log_sum_exp(const FeatureRowSet& rows, const ParamVector& theta) {
    return hessian_from_probs(grad_log_sum_exp(rows, theta));
}

namespace {

int checked_slot(const FeatureRowSet& rows, StateId observed_next) {
    const int j = rows.index_of(observed_next);
    if (j < 0) {
        throw DomainError("state " + std::to_string(observed_next) +
                          " is not reachable from (" + std::to_string(rows.state) + ", " +
                          std::to_string(rows.action) + ")");
    }
    return j;
}

} // namespace

Vector nll_gradient(const FeatureRowSet& rows, StateId observed_next, const ParamVector& theta) {
    const int j = checked_slot(rows, observed_next);
    Vector residual = grad_log_sum_exp(rows, theta);
    residual(j) -= 1.0;
    return rows.rows.transpose() * residual;
}

double nll_value(const FeatureRowSet& rows, StateId observed_next, const ParamVector& theta) {
    const int j = checked_slot(rows, observed_next);
    const Vector z = logits(rows, theta);
    // lse >= z_j up to rounding; the max keeps the value a valid -log probability.
    return std::max(0.0, log_sum_exp(z) - z(j));
}

double sigma_squared_from_probs(const Vector& p) {
    const auto m = static_cast<std::size_t>(p.size());
    if (m == 0) throw DomainError("sigma_squared of an empty distribution");
    if (m > kSigmaSubsetCap) {
        throw UnsupportedSizeError("sigma_squared: reachable set of size " + std::to_string(m) +
                                   " exceeds the subset enumeration cap of " +
                                   std::to_string(kSigmaSubsetCap));
    }
    if (m == 1) return 0.0;
    // A and its complement give the same (2P(A)-1)^2, so pin the last state outside A.
    const std::uint32_t half = 1u << (m - 1);
    double best = 1.0;
    for (std::uint32_t mask = 0; mask < half; ++mask) {
        double mass = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            if (mask & (1u << i)) mass += p(static_cast<Eigen::Index>(i));
        }
        const double gap = 2.0 * mass - 1.0;
        best = std::min(best, gap * gap);
    }
    return std::clamp(1.0 - best, 0.0, 1.0);
}

double sigma_squared(const FeatureRowSet& rows, const ParamVector& theta) {
    if (rows.size() > kSigmaSubsetCap) {
        throw UnsupportedSizeError("sigma_squared: reachable set of size " +
                                   std::to_string(rows.size()) + " exceeds the subset cap of " +
                                   std::to_string(kSigmaSubsetCap));
    }
    return sigma_squared_from_probs(grad_log_sum_exp(rows, theta));
}

StateId sample_next_state(const CategoricalDist& dist, Rng& rng) {
    if (dist.support.empty() || static_cast<std::size_t>(dist.probs.size()) != dist.support.size()) {
        throw DomainError("sample_next_state: malformed distribution");
    }
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t j = 0; j < dist.support.size(); ++j) {
        acc += dist.probs(static_cast<Eigen::Index>(j));
        if (u < acc) return dist.support[j];
    }
    // u landed in the rounding slack above the cumulative sum; pick the last positive entry.
    for (std::size_t j = dist.support.size(); j-- > 0;) {
        if (dist.probs(static_cast<Eigen::Index>(j)) > 0.0) return dist.support[j];
    }
    return dist.support.back();
}

} // namespace mnlmdp
