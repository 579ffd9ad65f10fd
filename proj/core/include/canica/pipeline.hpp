#pragma once

#include "canica/dataio.hpp"
#include "canica/decomp.hpp"
#include "canica/group_cca.hpp"
#include "canica/ica.hpp"
#include "canica/model_order.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canica {

/// Group model plus its ICA maps. `maps` is empty (zero rows) when n_grp = 0.
struct GroupFit {
    GroupModel group;
    ComponentMaps maps;
};

struct PipelineResult {
    int n_sbj = 0;
    std::optional<OrderEstimate> order;  // set when n_sbj was estimated
    std::vector<SubjectDecomposition> decomps;
    GroupFit fit;
    std::map<std::string, double> timings_ms;  // stage -> wall time
};

// Seed streams for the pipeline stages.
enum class Stage : std::uint64_t { kOrder = 1, kBootstrap = 2, kIca = 3, kSplits = 4 };

void require_group(std::span<const SubjectDataset> datasets);

/// n_sbj from the config when set, otherwise estimated on the configured
/// subject with max_order clipped to the data size.
int resolve_subject_order(std::span<const SubjectDataset> datasets, const RunConfig& config,
                          std::optional<OrderEstimate>* estimate, int jobs = 1);

std::vector<SubjectDecomposition> decompose_subjects(std::span<const SubjectDataset> datasets,
                                                     int n_sbj, int jobs = 1);

/// Group subspace, FastICA and thresholding for already-decomposed subjects.
/// `seed` drives the bootstrap and the ICA initialization.
GroupFit fit_group(std::span<const SubjectDecomposition> decomps, const RunConfig& config,
                   std::uint64_t seed, int jobs = 1);

/// Full pipeline on standardized datasets, seeded by config.rng_seed.
PipelineResult run_pipeline(std::span<const SubjectDataset> datasets, const RunConfig& config,
                            int jobs = 1);

}  // namespace canica
