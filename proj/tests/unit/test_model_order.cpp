#include "canica/errors.hpp"
#include "canica/linalg.hpp"
#include "canica/model_order.hpp"
#include "canica/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace canica {
namespace {

double condition(const MatrixXd& m) {
    const VectorXd s = thin_svd(m).s;
    return s[0] / s[s.size() - 1];
}

// Y = W P + sigma G with rank-4 W, P of condition number below 3.
SubjectDataset rank_four(std::uint64_t seed, double sigma) {
    Rng rng = derive_rng(seed, {77});
    MatrixXd w;
    MatrixXd p;
    do { w = gaussian_matrix(200, 4, rng); } while (condition(w) >= 3.0);
    do { p = gaussian_matrix(4, 1000, rng); } while (condition(p) >= 3.0);
    return standardize(w * p + sigma * gaussian_matrix(200, 1000, rng));
}

// Noiseless rank-r data whose components have well separated scales.
SubjectDataset noiseless_rank(int rank, std::uint64_t seed) {
    Rng rng = derive_rng(seed);
    MatrixXd w = gaussian_matrix(40, rank, rng);
    for (int j = 0; j < rank; ++j) w.col(j) *= std::pow(10.0, -j);
    return standardize(w * gaussian_matrix(rank, 120, rng));
}

TEST(EstimateOrder, NoiselessRankOneGivesOne) {
    const auto est = estimate_order(noiseless_rank(1, 3), 5, 100, 1);
    EXPECT_EQ(est.n_sbj, 1);
}

TEST(EstimateOrder, NoiselessStabilityIsOneAtTheRank) {
    // At k = r every replicate spans the row space exactly. Below r the
    // leading directions move with the resampling, by an amount set by the
    // eigengap.
    const auto est = estimate_order(noiseless_rank(3, 4), 6, 40, 2);
    EXPECT_EQ(est.n_sbj, 3);
    ASSERT_GE(est.stability_curve.size(), 3u);
    EXPECT_NEAR(est.stability_curve[2], 1.0, 1e-6);
    EXPECT_GT(est.stability_curve[0], 0.99);
    EXPECT_GT(est.stability_curve[1], 0.99);
}

TEST(EstimateOrder, RankFourRecoveredInNinetyPercentOfSeeds) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto est = estimate_order(rank_four(seed, 1.0), 10, 100, seed);
        if (est.n_sbj == 4) ++hits;
    }
    EXPECT_GE(hits, 18);
}

TEST(EstimateOrder, PureGaussianGivesZero) {
    // The 95th-percentile rule has a measured false-positive rate near 2% on
    // this shape, so one stray seed out of 20 is within its design.
    int zeros = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = derive_rng(seed, {78});
        const auto est = estimate_order(standardize(gaussian_matrix(100, 500, rng)), 10, 100, seed);
        if (est.n_sbj == 0) ++zeros;
        EXPECT_LE(est.n_sbj, 1) << "seed " << seed;
    }
    EXPECT_GE(zeros, 19);
}

TEST(EstimateOrder, MoreNoiseNeverRaisesTheMajorityOrder) {
    const std::vector<double> sigmas = {1.0, 3.0, 10.0};
    std::vector<int> majority;
    for (double sigma : sigmas) {
        std::map<int, int> votes;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            ++votes[estimate_order(rank_four(100 + seed, sigma), 10, 100, seed).n_sbj];
        }
        const auto top = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
            return a.second < b.second;
        });
        majority.push_back(top->first);
    }
    EXPECT_GE(majority[0], majority[1]);
    EXPECT_GE(majority[1], majority[2]);
    EXPECT_LT(majority[2], 4);
}

TEST(EstimateOrder, CurvesAreOverlapsAndConsistent) {
    const auto est = estimate_order(rank_four(7, 1.0), 10, 50, 7);
    EXPECT_LE(static_cast<std::size_t>(est.n_sbj), est.stability_curve.size());
    EXPECT_EQ(est.stability_curve.size(), est.noise_curve.size());
    for (double v : est.stability_curve) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);
    }
    for (double v : est.noise_curve) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_EQ(est.n_replicates, 50);
}

TEST(EstimateOrder, DeterministicAndScheduleIndependent) {
    const auto ds = rank_four(8, 1.0);
    const auto a = estimate_order(ds, 6, 30, 5, 1);
    const auto b = estimate_order(ds, 6, 30, 5, 3);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(EstimateOrder, Errors) {
    const auto ds = noiseless_rank(2, 9);
    EXPECT_THROW(estimate_order(ds, 0, 100, 0), DimensionError);
    EXPECT_THROW(estimate_order(ds, 40, 100, 0), DimensionError);
    EXPECT_THROW(estimate_order(ds, 3, 10, 0), ParameterError);
    SubjectDataset raw;
    raw.data = ds.data;
    EXPECT_THROW(estimate_order(raw, 3, 100, 0), PreconditionError);
}

}  // namespace
}  // namespace canica
