#pragma once

#include "canica/dataio.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace canica {

/// Result of the subject-level order selection. Curves are indexed by
/// candidate order minus one and stop at the first order that fails the
/// stability test (or at max_order / the numerical rank).
struct OrderEstimate {
    int n_sbj = 0;
    std::vector<double> stability_curve;  // mean bootstrap-pair overlap on the data
    std::vector<double> noise_curve;      // mean overlap on the Gaussian baseline
    std::vector<double> noise_threshold;  // 95th percentile of the baseline overlaps
    int n_replicates = 0;
    int max_order = 0;
};

inline constexpr double kOrderNoisePercentile = 0.95;

/// Bootstrap subspace-stability order selection.
///
/// For each candidate order k, pairs of bootstrap replicates (time frames
/// resampled with replacement) are drawn and the overlap tr(C^T C) / k of
/// their rank-k principal subspaces is recorded. The baseline for order k is
/// the same statistic on surrogate data made of the data's rank-(k-1)
/// reconstruction plus centered Gaussian noise carrying the residual energy,
/// so that order k is accepted only when the k-th direction is more stable
/// than a noise direction sitting on top of the same k-1 components. n_sbj is
/// the largest k such that every order j <= k passes.
OrderEstimate estimate_order(const SubjectDataset& dataset, int max_order, int n_replicates,
                             std::uint64_t seed, int jobs = 1);

nlohmann::json to_json(const OrderEstimate& estimate);

}  // namespace canica
