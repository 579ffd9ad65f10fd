#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace canica {

using Rng = std::mt19937_64;

/// Independent generator for a sub-task. Streams derived from the same root
/// seed and distinct index paths do not depend on scheduling order.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {});

/// A 64-bit seed for a named sub-stage, derived the same way as derive_rng.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    Rng rng = derive_rng(seed, path);
    return rng();
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Laplace draws scaled to unit variance.
Eigen::MatrixXd laplace_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace canica
