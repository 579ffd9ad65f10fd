#pragma once

#include "canica/dataio.hpp"
#include "canica/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace canica {

/// Random half-partitions of the subject set. The first half of each pair
/// has floor(S/2) subjects; subjects keep the order of the input id list.
struct SplitPlan {
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> splits;
    int n_splits = 0;
    std::uint64_t seed = 0;
};

inline constexpr int kDefaultSplits = 10;

/// Number of distinct unordered half-partitions of S subjects.
std::uint64_t count_half_partitions(std::size_t n_subjects);

SplitPlan make_splits(std::span<const std::string> subject_ids, int n_splits, std::uint64_t seed);

struct SplitOutcome {
    int n_grp_first = 0;
    int n_grp_second = 0;
    bool converged_first = true;
    bool converged_second = true;
    bool included = false;  // false when either half selected no component
    std::optional<MatchReport> unthresholded;
    std::optional<MatchReport> thresholded;
};

struct MetricSummary {
    double mean_e = 0.0;
    double sd_e = 0.0;
    double mean_t = 0.0;
    double sd_t = 0.0;
};

struct ReproducibilityReport {
    int n_sbj = 0;
    int full_n_grp = 0;
    std::vector<SplitOutcome> per_split;
    MetricSummary unthresholded;
    MetricSummary thresholded;
    int n_included = 0;
    int n_excluded = 0;
    /// Per full-group map: best |corr| with the maps of each half, averaged
    /// over every half that selected at least one component.
    VectorXd per_map_score;
};

/// Half-split reproducibility. Subject decompositions (and n_sbj) are computed
/// once on the full group; each half then gets its own group subspace
/// (n_grp re-estimated), FastICA and thresholding.
ReproducibilityReport run_crossval(std::span<const SubjectDataset> datasets,
                                   const RunConfig& config, const SplitPlan& plan, int jobs = 1);

/// Means and sample sds over the included splits.
void summarize(ReproducibilityReport& report);

nlohmann::json to_json(const SplitPlan& plan);
nlohmann::json to_json(const ReproducibilityReport& report);

}  // namespace canica
