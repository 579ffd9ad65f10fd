#pragma once

#include "canica/decomp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace canica {

/// Group-level reproducible subspace.
///
/// The stacked subject patterns P (S * n_sbj rows) are factored as
/// P = weights * diag(z) * canonical_variables. group_patterns holds the
/// first n_grp canonical variables (voxel-space rows), canonical_weights the
/// matching columns of the left factor.
struct GroupModel {
    MatrixXd group_patterns;           // n_grp x n_voxels, orthonormal rows
    VectorXd canonical_correlations;   // non-increasing
    double z_threshold = 0.0;
    int n_grp = 0;
    MatrixXd canonical_weights;        // (S * n_sbj) x n_grp
    bool used_cca = true;
};

/// Stacks the whitened (use_cca) or variance-weighted patterns of every subject
/// and keeps the leading canonical variables. With CCA, n_grp counts the
/// canonical correlations strictly above the bootstrap threshold unless
/// `forced_n_grp` is given. Without CCA, n_grp is `forced_n_grp` when given,
/// otherwise the order the CCA path would select on the same subjects;
/// z_threshold is that CCA threshold.
GroupModel fit_group_subspace(std::span<const SubjectDecomposition> decomps, bool use_cca,
                              double p_value, int n_bootstrap, std::uint64_t seed,
                              std::optional<int> forced_n_grp = std::nullopt, int jobs = 1);

/// Maximum canonical correlation of each bootstrap replicate drawn from the
/// subjects' observation-noise bases (n_sbj rows per subject, without
/// replacement). Entries are in replicate order.
std::vector<double> bootstrap_null_samples(std::span<const SubjectDecomposition> decomps,
                                           int n_bootstrap, std::uint64_t seed, int jobs = 1);

/// The (1 - p_value) linear-interpolation quantile of the bootstrap null of the
/// maximum canonical correlation.
double bootstrap_null(std::span<const SubjectDecomposition> decomps, int n_bootstrap,
                      double p_value, std::uint64_t seed, int jobs = 1);

void save_group_model(const std::filesystem::path& dir, const GroupModel& model);
GroupModel load_group_model(const std::filesystem::path& dir);
nlohmann::json summary_json(const GroupModel& model);

}  // namespace canica
