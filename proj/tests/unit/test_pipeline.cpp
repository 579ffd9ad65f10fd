#include "canica/errors.hpp"
#include "canica/metrics.hpp"
#include "canica/pipeline.hpp"
#include "canica/synth.hpp"

#include <gtest/gtest.h>

namespace canica {
namespace {

RunConfig reference_config() {
    RunConfig c;
    c.n_sbj = 8;
    c.n_bootstrap = 200;
    return c;
}

double mean_recovery(const SynthSpec& spec, const RunConfig& config) {
    const auto group = generate_group(spec);
    const auto result = run_pipeline(group.datasets, config);
    if (result.fit.group.n_grp == 0) return 0.0;
    return best_match_scores(group.truth.sources, result.fit.maps.maps).mean();
}

TEST(Pipeline, ReferenceScenarioRecoversFiveSources) {
    SynthSpec spec;
    spec.seed = 3;
    const auto group = generate_group(spec);
    const auto result = run_pipeline(group.datasets, reference_config());
    EXPECT_EQ(result.n_sbj, 8);
    EXPECT_FALSE(result.order.has_value());
    EXPECT_FALSE(result.timings_ms.contains("order"));
    EXPECT_EQ(result.fit.group.n_grp, 5);
    EXPECT_GE(best_match_scores(group.truth.sources, result.fit.maps.maps).mean(), 0.9);
    for (const char* stage : {"subject_svd", "group_cca", "ica", "threshold"}) {
        EXPECT_TRUE(result.timings_ms.contains(stage)) << stage;
    }
}

TEST(Pipeline, ObservationNoiseLowersRecovery) {
    // The grid starts at the reference noise level. Below it, per-voxel
    // standardization divides by signal-dominated variances and recovery
    // degrades again, so the relation is not monotone there.
    std::vector<double> means;
    for (double noise : {10.0, 20.0, 40.0}) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            SynthSpec spec;
            spec.noise_scale = noise;
            spec.n_voxels = 1000;
            spec.seed = 200 + seed;
            RunConfig config = reference_config();
            config.rng_seed = seed;
            total += mean_recovery(spec, config);
        }
        means.push_back(total / 20.0);
    }
    EXPECT_GT(means[0], means[1]);
    EXPECT_GT(means[1], means[2]);
}

TEST(Pipeline, JobsDoNotChangeResults) {
    SynthSpec spec;
    spec.n_subjects = 4;
    spec.n_voxels = 600;
    const auto group = generate_group(spec);
    RunConfig config = reference_config();
    config.n_sbj.reset();
    config.max_order = 10;
    config.order_replicates = 30;
    const auto a = run_pipeline(group.datasets, config, 1);
    const auto b = run_pipeline(group.datasets, config, 3);
    ASSERT_TRUE(a.order.has_value());
    EXPECT_EQ(to_json(*a.order).dump(), to_json(*b.order).dump());
    EXPECT_EQ(a.fit.group.canonical_correlations, b.fit.group.canonical_correlations);
    EXPECT_EQ(a.fit.group.z_threshold, b.fit.group.z_threshold);
    EXPECT_EQ(a.fit.maps.maps, b.fit.maps.maps);
}

TEST(Pipeline, NoCcaReusesTheCcaOrder) {
    SynthSpec spec;
    spec.n_subjects = 4;
    spec.n_voxels = 800;
    const auto group = generate_group(spec);
    RunConfig config = reference_config();
    const auto cca = run_pipeline(group.datasets, config);
    config.use_cca = false;
    const auto fe = run_pipeline(group.datasets, config);
    EXPECT_FALSE(fe.fit.group.used_cca);
    EXPECT_EQ(fe.fit.group.n_grp, cca.fit.group.n_grp);
    EXPECT_EQ(fe.fit.group.z_threshold, cca.fit.group.z_threshold);
}

TEST(Pipeline, Preconditions) {
    SynthSpec spec;
    spec.n_subjects = 2;
    spec.n_voxels = 1000;
    auto group = generate_group(spec);
    EXPECT_THROW(run_pipeline(std::span(group.datasets).first(1), reference_config()),
                 InsufficientSubjectsError);
    auto wrong = group.datasets;
    wrong[1].data = wrong[1].data.leftCols(500);
    EXPECT_THROW(run_pipeline(wrong, reference_config()), DimensionError);
    auto raw = group.datasets;
    raw[0].standardized = false;
    EXPECT_THROW(run_pipeline(raw, reference_config()), PreconditionError);
    RunConfig bad = reference_config();
    bad.n_sbj.reset();
    bad.order_subject = 5;
    EXPECT_THROW(run_pipeline(group.datasets, bad), ConfigError);
}

}  // namespace
}  // namespace canica
