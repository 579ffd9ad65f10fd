#include "canica/rng.hpp"

#include <cmath>
#include <vector>

namespace canica {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (std::uint64_t p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill order so the draw sequence matches the file layout.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

Eigen::MatrixXd laplace_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    // Laplace(0, b) has variance 2 b^2.
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution coin(0.5);
    const double b = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double magnitude = b * expo(rng);
            m(i, j) = coin(rng) ? magnitude : -magnitude;
        }
    return m;
}

}  // namespace canica
