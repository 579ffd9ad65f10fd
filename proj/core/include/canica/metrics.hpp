#pragma once

#include "canica/linalg.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <utility>
#include <vector>

namespace canica {

/// Comparison of two component sets.
struct MatchReport {
    MatrixXd cross_corr;  // k1 x k2
    MatrixXd reordered;   // d x d, absolute values, matched pairs on the diagonal
    std::vector<std::pair<Eigen::Index, Eigen::Index>> permutation;  // in match order
    double e = 0.0;
    double t = 0.0;
    Eigen::Index d = 0;
    /// Fractions of matched pairs with |corr| > 0.75, > 0.50 and < 0.25.
    std::array<double, 3> percentiles{};
};

/// How `cross_correlation` treats rows with zero variance.
enum class DegenerateRows {
    kThrow,  // DegenerateRowError naming the row
    kZero,   // correlations involving the row are 0 (thresholded maps)
};

/// Pearson correlation of every row of a1 with every row of a2 (over voxels).
MatrixXd cross_correlation(const MatrixXd& a1, const MatrixXd& a2,
                           DegenerateRows policy = DegenerateRows::kThrow);

/// tr(C^T C) / min(k1, k2).
double subspace_energy(const MatrixXd& c);

/// Greedy one-to-one matching on |C|: repeatedly take the largest remaining
/// entry (ties: smallest row, then smallest column) and retire its row and
/// column. Fills cross_corr, reordered, permutation, t, d, percentiles and e.
MatchReport greedy_match(const MatrixXd& c);

std::array<double, 3> percentile_summary(const MatchReport& report);

/// cross_correlation followed by greedy_match.
MatchReport compare_maps(const MatrixXd& a1, const MatrixXd& a2,
                         DegenerateRows policy = DegenerateRows::kThrow);

/// For each row of `reference`, the best |corr| with any row of `candidates`.
VectorXd best_match_scores(const MatrixXd& reference, const MatrixXd& candidates,
                           DegenerateRows policy = DegenerateRows::kThrow);

nlohmann::json to_json(const MatchReport& report);

}  // namespace canica
