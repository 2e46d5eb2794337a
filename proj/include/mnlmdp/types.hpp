#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mnlmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Transition parameter for one step (theta_h). Raw ONS iterates may leave the
/// B_theta ball before projection; everything stored in an environment is inside it.
using ParamVector = Eigen::VectorXd;

using StateId = std::int32_t;
using ActionId = std::int32_t;

/// All simulation randomness flows through this engine so seeded runs replay exactly.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

/// Independent engine for (seed, stream). Streams separate environment sampling
/// from agent exploration so changing the agent never perturbs the transitions drawn.
inline Rng make_stream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), stream, 0x6d6e6cu};
    return Rng(seq);
}

} // namespace mnlmdp
