#pragma once
// Slow, independent reference computations used to check the library. Nothing
// here calls into the code under test except for plain data types.

#include "mnlmdp/envs.hpp"
#include "mnlmdp/mnl_core.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using mnlmdp::Matrix;
using mnlmdp::Vector;

/// Random generators for property tests.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    double normal() { return std::normal_distribution<double>()(rng); }

    Vector normal_vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }
    /// Uniform point in the ball of radius r.
    Vector in_ball(Eigen::Index n, double r) {
        Vector v = normal_vector(n);
        const double u = std::pow(uniform(0.0, 1.0), 1.0 / static_cast<double>(n));
        return v.normalized() * (r * u);
    }
    /// Distribution on the simplex with all entries positive.
    Vector simplex(Eigen::Index m) {
        Vector p(m);
        for (Eigen::Index i = 0; i < m; ++i) p(i) = -std::log(uniform(1e-12, 1.0));
        return p / p.sum();
    }
    /// m rows of dimension d, each of norm <= b_phi.
    mnlmdp::FeatureRowSet rows(int m, int d, double b_phi = 1.0) {
        mnlmdp::FeatureRowSet r;
        r.rows.resize(m, d);
        for (int j = 0; j < m; ++j) {
            r.next_states.push_back(j);
            r.rows.row(j) = in_ball(d, b_phi).transpose();
        }
        return r;
    }
    /// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
    Matrix spd(Eigen::Index d, double lo, double hi) {
        Matrix a(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) a(i, j) = normal();
        Eigen::HouseholderQR<Matrix> qr(a);
        const Matrix q = qr.householderQ();
        Vector ev(d);
        for (Eigen::Index i = 0; i < d; ++i) ev(i) = uniform(lo, hi);
        return q * ev.asDiagonal() * q.transpose();
    }
};

/// Softmax in long double without any shift; safe for the moderate logits used in tests.
inline Vector softmax_ld(const Vector& z) {
    std::vector<long double> e(static_cast<std::size_t>(z.size()));
    long double total = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += e[static_cast<std::size_t>(i)] = std::exp(static_cast<long double>(z(i)));
    Vector p(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = static_cast<double>(e[static_cast<std::size_t>(i)] / total);
    return p;
}

inline double lse_ld(const Vector& z) {
    long double total = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += std::exp(static_cast<long double>(z(i)));
    return static_cast<double>(std::log(total));
}

/// Central difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

/// Central difference Jacobian of a vector function (rows = outputs).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h) {
    const Vector f0 = f(x);
    Matrix j(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector a = x, b = x;
        a(i) += h;
        b(i) -= h;
        j.col(i) = (f(a) - f(b)) / (2 * h);
    }
    return j;
}

/// max over x in {-1,+1}^m of x^T (diag(p) - p p^T) x.
inline double sigma_hypercube(const Vector& p) {
    const Eigen::Index m = p.size();
    const Matrix lam = Matrix(p.asDiagonal()) - p * p.transpose();
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        Vector x(m);
        for (Eigen::Index i = 0; i < m; ++i) x(i) = (mask >> i) & 1 ? 1.0 : -1.0;
        best = std::max(best, x.dot(lam * x));
    }
    return best;
}

/// Grid search for argmin_{|t| <= b} (t - c)^T H (t - c) in 2-D. The grid is
/// polar (radial and arc-length spacing `step`) so the boundary circle is sampled exactly.
inline Vector grid_projection_2d(const Matrix& h, const Vector& c, double b, double step) {
    Vector best = Vector::Zero(2);
    double best_val = c.dot(h * c);
    const int nr = static_cast<int>(std::ceil(b / step));
    for (int i = 1; i <= nr; ++i) {
        const double r = b * i / nr;
        const int na = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / step)));
        for (int j = 0; j < na; ++j) {
            const double a = 2.0 * std::numbers::pi * j / na;
            Vector t(2);
            t << r * std::cos(a), r * std::sin(a);
            const Vector diff = t - c;
            const double val = diff.dot(h * diff);
            if (val < best_val) {
                best_val = val;
                best = t;
            }
        }
    }
    return best;
}

/// Confidence radius written out term by term.
inline double beta(std::uint64_t k, double delta, int d, double bp, double bt) {
    const double e1 = std::exp(1.0) - 1.0;
    const double eps = bp * bp + 4.0 * bp * bp * std::log(d / delta);
    const double eta = e1 * 3.0 + e1 * 4.0 * bp * bp * bt * bt;
    const double c = e1 * (6.0 + 8.0 * bp * bt + 2.0 * bp * bp * bt * bt);
    double log_term = std::log((static_cast<double>(k) + 1.0) / d);
    if (log_term < 0) log_term = 0;
    const double t1 = 4.0 * c * bt * bt * eps / eta;
    const double t2 = 2.0 * d * c * eta * log_term;
    const double t3 = (16.0 * c * bp * bp * bt * bt / eta + 4.0 * c * c) * std::log(1.0 / delta);
    const double t4 = 32.0 * bp * bp * bt * bt * std::log(d / delta);
    const double gamma = t1 + t2 + t3 + t4;
    return std::sqrt(eps) * bt + std::sqrt(eps * bt * bt + 4.0 * gamma);
}

/// Solution of min_theta sum_v (g_v^T (theta - theta_{v-1}))^2 + ridge |theta|^2,
/// i.e. (ridge I + sum g g^T)^{-1} sum g g^T theta_{v-1}, solved from scratch.
inline Vector weighted_least_squares(const std::vector<Vector>& grads, const std::vector<Vector>& prev, double ridge) {
    const Eigen::Index d = grads.front().size();
    Matrix a = ridge * Matrix::Identity(d, d);
    Vector b = Vector::Zero(d);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        a += grads[i] * grads[i].transpose();
        b += grads[i] * grads[i].dot(prev[i]);
    }
    return a.fullPivLu().solve(b);
}

/// Transition probabilities of (h, s, a) under theta*, from the raw feature rows.
inline Vector true_probs(const mnlmdp::MnlMdp& env, int h, int s, int a) {
    const auto& rows = env.features.at(h, s, a);
    return softmax_ld(rows.rows * env.theta_star[static_cast<std::size_t>(h)]);
}

/// Backward induction over every (h, s) with rows; returns V[h][s] (H + 1 layers).
/// Optimal values when `pi` is null, otherwise the values of `pi`.
inline std::vector<std::vector<double>> values(const mnlmdp::MnlMdp& env, const mnlmdp::Policy* pi) {
    const int H = env.horizon, S = env.num_states, A = env.num_actions;
    std::vector<std::vector<double>> v(static_cast<std::size_t>(H + 1), std::vector<double>(static_cast<std::size_t>(S), 0.0));
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            if (!env.features.has(h, s)) continue;
            double best = -1e300, mixed = 0.0;
            for (int a = 0; a < A; ++a) {
                const auto& rows = env.features.at(h, s, a);
                const Vector p = true_probs(env, h, s, a);
                double q = env.rewards(s, a);
                for (std::size_t j = 0; j < rows.next_states.size(); ++j) {
                    q += p(static_cast<Eigen::Index>(j)) * v[static_cast<std::size_t>(h + 1)][static_cast<std::size_t>(rows.next_states[j])];
                }
                best = std::max(best, q);
                if (pi) mixed += (*pi)[static_cast<std::size_t>(h)](s, a) * q;
            }
            v[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)] = pi ? mixed : best;
        }
    }
    return v;
}

} // namespace oracle
