#include "canica/errors.hpp"
#include "canica/ica.hpp"
#include "canica/linalg.hpp"
#include "canica/metrics.hpp"
#include "canica/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace canica {
namespace {

MatrixXd uniform_sources(Eigen::Index n, Eigen::Index p, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
    MatrixXd s(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index v = 0; v < p; ++v) s(i, v) = u(gen);
    return s;
}

// Rows of (X X^T)^{-1/2} X: orthonormal rows spanning the row space of X.
MatrixXd whiten_rows(const MatrixXd& x) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(x * x.transpose());
    return eig.operatorInverseSqrt() * x;
}

// Amari index of G where maps ~ G * sources, with G from least squares.
double amari_of_fit(const MatrixXd& maps, const MatrixXd& sources) {
    const MatrixXd g = maps * sources.transpose() * (sources * sources.transpose()).inverse();
    return oracle::amari_index(g);
}

void expect_standardized_rows(const MatrixXd& maps) {
    for (Eigen::Index i = 0; i < maps.rows(); ++i) {
        EXPECT_NEAR(maps.row(i).mean(), 0.0, 1e-6);
        EXPECT_NEAR(maps.row(i).squaredNorm() / static_cast<double>(maps.cols()), 1.0, 1e-4);
    }
}

TEST(FastIca, SingleComponentIsStandardizedInput) {
    Rng rng = derive_rng(1);
    MatrixXd row = laplace_matrix(1, 300, rng);
    row /= row.norm();
    const auto maps = fastica(row, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 200, 1e-6, 0);
    ASSERT_EQ(maps.mixing.rows(), 1);
    ASSERT_EQ(maps.mixing.cols(), 1);
    const double mu = row.mean();
    const double sd = std::sqrt((row.array() - mu).square().mean());
    const MatrixXd expected = (row.array() - mu) / sd;
    const double sign = maps.maps(0, 0) * expected(0, 0) > 0.0 ? 1.0 : -1.0;
    EXPECT_LT((maps.maps - sign * expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FastIca, SeparatesUniformSourcesEveryMode) {
    const MatrixXd s = uniform_sources(2, 20000, 3);
    Rng rng = derive_rng(2);
    const MatrixXd a = gaussian_matrix(2, 2, rng);
    const MatrixXd z = whiten_rows(a * s);
    for (auto g : {Nonlinearity::kLogcosh, Nonlinearity::kCube}) {
        for (auto mode : {IcaMode::kSymmetric, IcaMode::kDeflation}) {
            const auto maps = fastica(z, g, mode, 200, 1e-6, 4);
            EXPECT_TRUE(maps.converged);
            EXPECT_LT(amari_of_fit(maps.maps, s), 0.05) << to_string(g) << " " << to_string(mode);
            expect_standardized_rows(maps.maps);
        }
    }
}

TEST(FastIca, ReconstructsCenteredSubspace) {
    Rng rng = derive_rng(5);
    const MatrixXd z = whiten_rows(laplace_matrix(4, 3000, rng));
    const auto maps = fastica(z, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 200, 1e-8, 1);
    const MatrixXd centered = z.colwise() - z.rowwise().mean();
    EXPECT_LT((centered - maps.mixing * maps.maps).norm() / centered.norm(), 1e-6);
    EXPECT_TRUE(maps.converged);
    EXPECT_LT(orthonormality_defect(maps.unmixing), 1e-6);
    EXPECT_GT(std::abs(maps.mixing.determinant()), 1e-8);
    for (Eigen::Index i = 0; i < maps.maps.rows(); ++i) {
        EXPECT_GT(maps.maps.row(i).array().cube().mean(), 0.0);
    }
}

TEST(FastIca, GaussianSourcesDoNotCrash) {
    Rng rng = derive_rng(6);
    const MatrixXd z = whiten_rows(gaussian_matrix(2, 5000, rng));
    for (auto mode : {IcaMode::kSymmetric, IcaMode::kDeflation}) {
        const auto maps = fastica(z, Nonlinearity::kCube, mode, 50, 1e-9, 2);
        expect_standardized_rows(maps.maps);
        const MatrixXd c = maps.maps * maps.maps.transpose() / 5000.0;
        EXPECT_LT((c - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(FastIca, RowPermutationOnlyPermutesMaps) {
    Rng rng = derive_rng(7);
    const MatrixXd z = whiten_rows(laplace_matrix(3, 4000, rng));
    MatrixXd permuted(3, 4000);
    permuted << z.row(2), z.row(0), z.row(1);
    const auto a = fastica(z, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 500, 1e-12, 3);
    const auto b = fastica(permuted, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 500, 1e-12, 3);
    EXPECT_NEAR(compare_maps(a.maps, b.maps).t, 1.0, 1e-6);
}

TEST(FastIca, SameSeedIsBitwiseReproducible) {
    Rng rng = derive_rng(8);
    const MatrixXd z = whiten_rows(laplace_matrix(3, 2000, rng));
    const auto a = fastica(z, Nonlinearity::kLogcosh, IcaMode::kDeflation, 200, 1e-6, 9);
    const auto b = fastica(z, Nonlinearity::kLogcosh, IcaMode::kDeflation, 200, 1e-6, 9);
    EXPECT_TRUE((a.maps.array() == b.maps.array()).all());
    EXPECT_EQ(a.n_iterations, b.n_iterations);
}

TEST(FastIca, NonConvergenceIsFlagged) {
    Rng rng = derive_rng(9);
    const MatrixXd z = whiten_rows(laplace_matrix(4, 2000, rng));
    const auto maps = fastica(z, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 1, 1e-14, 1);
    EXPECT_FALSE(maps.converged);
    EXPECT_EQ(maps.n_iterations, 1);
    expect_standardized_rows(maps.maps);
}

TEST(FastIca, Errors) {
    Rng rng = derive_rng(10);
    EXPECT_THROW(fastica(gaussian_matrix(2, 100, rng), Nonlinearity::kLogcosh, IcaMode::kSymmetric,
                         200, 1e-6, 0),
                 PreconditionError);
    EXPECT_THROW(fastica(MatrixXd(0, 100), Nonlinearity::kLogcosh, IcaMode::kSymmetric, 200, 1e-6, 0),
                 DimensionError);
}

TEST(ThresholdMaps, ZeroTauKeepsNonzeroVoxels) {
    ComponentMaps maps;
    maps.maps = MatrixXd(2, 4);
    maps.maps << 0.5, 0.0, -2.0, 1.0, 0.0, 0.0, 0.0, 0.0;
    const auto t = threshold_maps(maps, 0.0);
    EXPECT_EQ(t.supports[0], (std::vector<Eigen::Index>{0, 2, 3}));
    EXPECT_TRUE(t.supports[1].empty());
    EXPECT_EQ(t.maps, maps.maps);
    const auto strict = threshold_maps(maps, 1.0);
    EXPECT_EQ(strict.supports[0], (std::vector<Eigen::Index>{2}));
    const MatrixXd values = thresholded_values(strict);
    EXPECT_EQ(values(0, 2), -2.0);
    EXPECT_EQ(values(0, 3), 0.0);
    EXPECT_THROW(threshold_maps(maps, -0.1), ParameterError);
}

TEST(ThresholdMaps, NormalTailFraction) {
    const double expected = oracle::normal_two_sided_tail(3.0);
    ComponentMaps maps;
    Rng rng = derive_rng(11);
    maps.maps = gaussian_matrix(1, 100000, rng);
    const auto t = threshold_maps(maps, 3.0);
    const double fraction = static_cast<double>(t.supports[0].size()) / 100000.0;
    EXPECT_GE(fraction, 0.0017);
    EXPECT_LE(fraction, 0.0037);
    // Binomial sd at this size is about 1.6e-4.
    EXPECT_NEAR(fraction, expected, 6.5e-4);
}

TEST(ComponentMapsIo, RoundTrip) {
    test::TempDir dir("ica_persist");
    Rng rng = derive_rng(12);
    const MatrixXd z = whiten_rows(laplace_matrix(2, 500, rng));
    const auto maps = threshold_maps(fastica(z, Nonlinearity::kCube, IcaMode::kSymmetric, 200, 1e-6, 0), 2.0);
    save_component_maps(dir.path(), maps);
    const auto back = load_component_maps(dir.path());
    EXPECT_EQ(back.maps, maps.maps);
    EXPECT_EQ(back.mixing, maps.mixing);
    EXPECT_EQ(back.supports, maps.supports);
    EXPECT_EQ(back.threshold, 2.0);
}

}  // namespace
}  // namespace canica
