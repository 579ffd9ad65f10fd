#include "canica/metrics.hpp"

#include "canica/dataio.hpp"
#include "canica/errors.hpp"

#include <cmath>

namespace canica {

namespace {

// Rows centered and scaled to unit Euclidean norm; zero-variance rows become 0.
MatrixXd normalized_rows(const MatrixXd& a, DegenerateRows policy, const char* which) {
    MatrixXd out = a.colwise() - a.rowwise().mean();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        const double scale = a.row(i).cwiseAbs().maxCoeff();
        if (norm <= 1e-12 * std::sqrt(static_cast<double>(a.cols())) * scale) {
            if (policy == DegenerateRows::kThrow) {
                throw DegenerateRowError(std::string("row ") + std::to_string(i) + " of " + which +
                                         " has zero variance");
            }
            out.row(i).setZero();
        } else {
            out.row(i) /= norm;
        }
    }
    return out;
}

}  // namespace

MatrixXd cross_correlation(const MatrixXd& a1, const MatrixXd& a2, DegenerateRows policy) {
    if (a1.cols() != a2.cols()) {
        throw DimensionError("map sets have " + std::to_string(a1.cols()) + " and " +
                             std::to_string(a2.cols()) + " voxels");
    }
    if (a1.cols() < 2) throw DimensionError("correlation needs at least two voxels");
    const MatrixXd n1 = normalized_rows(a1, policy, "first map set");
    const MatrixXd n2 = normalized_rows(a2, policy, "second map set");
    return (n1 * n2.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
}

double subspace_energy(const MatrixXd& c) {
    if (c.size() == 0) throw DimensionError("empty cross-correlation matrix");
    if (!c.allFinite()) throw ParameterError("cross-correlation matrix is not finite");
    return c.squaredNorm() / static_cast<double>(std::min(c.rows(), c.cols()));
}

MatchReport greedy_match(const MatrixXd& c) {
    if (c.size() == 0) throw DimensionError("empty cross-correlation matrix");
    if (!c.allFinite()) throw ParameterError("cross-correlation matrix is not finite");
    MatchReport r;
    r.cross_corr = c;
    r.d = std::min(c.rows(), c.cols());
    const MatrixXd mag = c.cwiseAbs();
    std::vector<bool> row_used(static_cast<std::size_t>(c.rows()), false);
    std::vector<bool> col_used(static_cast<std::size_t>(c.cols()), false);
    for (Eigen::Index step = 0; step < r.d; ++step) {
        Eigen::Index bi = -1, bj = -1;
        double best = -1.0;
        for (Eigen::Index i = 0; i < c.rows(); ++i) {
            if (row_used[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                if (col_used[static_cast<std::size_t>(j)]) continue;
                if (mag(i, j) > best) {  // strict: earlier (i, j) wins ties
                    best = mag(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        row_used[static_cast<std::size_t>(bi)] = true;
        col_used[static_cast<std::size_t>(bj)] = true;
        r.permutation.emplace_back(bi, bj);
    }
    r.reordered.resize(r.d, r.d);
    for (Eigen::Index a = 0; a < r.d; ++a)
        for (Eigen::Index b = 0; b < r.d; ++b)
            r.reordered(a, b) = mag(r.permutation[static_cast<std::size_t>(a)].first,
                                    r.permutation[static_cast<std::size_t>(b)].second);
    r.t = r.reordered.trace() / static_cast<double>(r.d);
    r.e = subspace_energy(c);
    r.percentiles = percentile_summary(r);
    return r;
}

std::array<double, 3> percentile_summary(const MatchReport& report) {
    std::array<double, 3> out{};
    if (report.d == 0) return out;
    const auto diag = report.reordered.diagonal();
    const double d = static_cast<double>(report.d);
    out[0] = static_cast<double>((diag.array() > 0.75).count()) / d;
    out[1] = static_cast<double>((diag.array() > 0.50).count()) / d;
    out[2] = static_cast<double>((diag.array() < 0.25).count()) / d;
    return out;
}

MatchReport compare_maps(const MatrixXd& a1, const MatrixXd& a2, DegenerateRows policy) {
    return greedy_match(cross_correlation(a1, a2, policy));
}

VectorXd best_match_scores(const MatrixXd& reference, const MatrixXd& candidates,
                           DegenerateRows policy) {
    if (candidates.rows() == 0) return VectorXd::Zero(reference.rows());
    return cross_correlation(reference, candidates, policy).cwiseAbs().rowwise().maxCoeff();
}

nlohmann::json to_json(const MatchReport& r) {
    nlohmann::json j;
    j["d"] = r.d;
    j["e"] = report_round(r.e);
    j["t"] = report_round(r.t);
    auto perm = nlohmann::json::array();
    for (const auto& [a, b] : r.permutation) perm.push_back({a, b});
    j["permutation"] = perm;
    j["matched_abs_corr"] = report_array(VectorXd(r.reordered.diagonal()));
    j["percentiles"] = {{"above_0_75", report_round(r.percentiles[0])},
                        {"above_0_50", report_round(r.percentiles[1])},
                        {"below_0_25", report_round(r.percentiles[2])}};
    return j;
}

}  // namespace canica
