#include "canica/pipeline.hpp"

#include "canica/errors.hpp"
#include "canica/parallel.hpp"
#include "canica/rng.hpp"

#include <algorithm>
#include <chrono>

namespace canica {

namespace {

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink, std::string name)
        : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        sink_[name_] = std::chrono::duration<double, std::milli>(elapsed).count();
    }

private:
    std::map<std::string, double>& sink_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
    return derive_seed(seed, {static_cast<std::uint64_t>(stage)});
}

}  // namespace

void require_group(std::span<const SubjectDataset> datasets) {
    if (datasets.size() < 2) throw InsufficientSubjectsError("at least 2 subjects required");
    for (const auto& d : datasets) {
        if (!d.standardized) {
            throw PreconditionError("subject " + d.subject_id + " is not standardized");
        }
        if (d.n_voxels() != datasets.front().n_voxels()) {
            throw DimensionError("subject " + d.subject_id + " has " + std::to_string(d.n_voxels()) +
                                 " voxels, expected " + std::to_string(datasets.front().n_voxels()));
        }
    }
}

int resolve_subject_order(std::span<const SubjectDataset> datasets, const RunConfig& config,
                          std::optional<OrderEstimate>* estimate, int jobs) {
    if (config.n_sbj) return *config.n_sbj;
    if (config.order_subject < 0 || static_cast<std::size_t>(config.order_subject) >= datasets.size()) {
        throw ConfigError("order_subject = " + std::to_string(config.order_subject) +
                          " but only " + std::to_string(datasets.size()) + " subjects");
    }
    const auto& subject = datasets[static_cast<std::size_t>(config.order_subject)];
    const auto cap = static_cast<int>(std::min(subject.n_frames(), subject.n_voxels()) - 1);
    const int max_order = std::min(config.max_order, cap);
    OrderEstimate est = estimate_order(subject, max_order, config.order_replicates,
                                       stage_seed(config.rng_seed, Stage::kOrder), jobs);
    if (est.n_sbj < 1) {
        throw DimensionError("order estimation found no stable subject-level component");
    }
    const int n_sbj = est.n_sbj;
    if (estimate != nullptr) *estimate = std::move(est);
    return n_sbj;
}

std::vector<SubjectDecomposition> decompose_subjects(std::span<const SubjectDataset> datasets,
                                                     int n_sbj, int jobs) {
    std::vector<SubjectDecomposition> out(datasets.size());
    parallel_for(datasets.size(), jobs,
                 [&](std::size_t s) { out[s] = subject_svd(datasets[s], n_sbj); });
    return out;
}

GroupFit fit_group(std::span<const SubjectDecomposition> decomps, const RunConfig& config,
                   std::uint64_t seed, int jobs) {
    GroupFit fit;
    fit.group = fit_group_subspace(decomps, config.use_cca, config.p_value, config.n_bootstrap,
                                   stage_seed(seed, Stage::kBootstrap), config.n_grp, jobs);
    if (fit.group.n_grp == 0) {
        fit.maps.maps.resize(0, decomps.front().n_voxels());
        fit.maps.mixing.resize(0, 0);
        fit.maps.unmixing.resize(0, 0);
        fit.maps.converged = true;
        fit.maps.threshold = config.map_threshold;
        return fit;
    }
    fit.maps = fastica(fit.group.group_patterns, config.ica_nonlinearity, config.ica_mode,
                       config.ica_max_iter, config.ica_tol, stage_seed(seed, Stage::kIca));
    fit.maps = threshold_maps(std::move(fit.maps), config.map_threshold);
    return fit;
}

PipelineResult run_pipeline(std::span<const SubjectDataset> datasets, const RunConfig& config,
                            int jobs) {
    require_group(datasets);
    PipelineResult result;
    if (config.n_sbj) {
        result.n_sbj = *config.n_sbj;
    } else {
        StageTimer t(result.timings_ms, "order");
        result.n_sbj = resolve_subject_order(datasets, config, &result.order, jobs);
    }
    {
        StageTimer t(result.timings_ms, "subject_svd");
        result.decomps = decompose_subjects(datasets, result.n_sbj, jobs);
    }
    {
        StageTimer t(result.timings_ms, "group_cca");
        result.fit.group = fit_group_subspace(result.decomps, config.use_cca, config.p_value,
                                              config.n_bootstrap,
                                              stage_seed(config.rng_seed, Stage::kBootstrap),
                                              config.n_grp, jobs);
    }
    {
        StageTimer t(result.timings_ms, "ica");
        if (result.fit.group.n_grp > 0) {
            result.fit.maps = fastica(result.fit.group.group_patterns, config.ica_nonlinearity,
                                      config.ica_mode, config.ica_max_iter, config.ica_tol,
                                      stage_seed(config.rng_seed, Stage::kIca));
        } else {
            result.fit.maps.maps.resize(0, datasets.front().n_voxels());
            result.fit.maps.converged = true;
        }
    }
    {
        StageTimer t(result.timings_ms, "threshold");
        result.fit.maps = threshold_maps(std::move(result.fit.maps), config.map_threshold);
    }
    return result;
}

}  // namespace canica
