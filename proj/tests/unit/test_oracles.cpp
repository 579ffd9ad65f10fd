#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

TEST(Oracles, JacobiRecoversKnownSpectrum) {
    Eigen::MatrixXd a(2, 2);
    a << 2.0, 1.0, 1.0, 2.0;
    const auto e = oracle::jacobi_eigen(a);
    EXPECT_NEAR(e.values[0], 3.0, 1e-14);
    EXPECT_NEAR(e.values[1], 1.0, 1e-14);
    EXPECT_NEAR(std::abs(e.vectors(0, 0)), std::sqrt(0.5), 1e-14);
}

TEST(Oracles, JacobiReconstructsRandomSymmetric) {
    const Eigen::MatrixXd q = oracle::random_orthogonal(6, 3);
    Eigen::VectorXd lambda(6);
    lambda << 9, 5, 4, 2, 1, 0.5;
    const Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
    const auto e = oracle::jacobi_eigen(a);
    EXPECT_LT((e.values - lambda).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - a).norm(), 1e-12);
}

TEST(Oracles, PearsonOfAffineCopyIsOne) {
    const std::vector<double> x = {1, 2, 4, 8};
    const std::vector<double> y = {3, 5, 9, 17};
    EXPECT_NEAR(oracle::pearson(x, y), 1.0, 1e-15);
}

TEST(Oracles, AmariIndexOfScaledPermutationIsZero) {
    Eigen::MatrixXd p(3, 3);
    p << 0, 2, 0, 0, 0, -1, 5, 0, 0;
    EXPECT_DOUBLE_EQ(oracle::amari_index(p), 0.0);
    EXPECT_GT(oracle::amari_index(Eigen::MatrixXd::Ones(3, 3)), 0.9);
}

TEST(Oracles, NormalTailAtThreeMatchesErfc) {
    const double tail = oracle::normal_two_sided_tail(3.0);
    EXPECT_NEAR(tail, std::erfc(3.0 / std::sqrt(2.0)), 1e-12);
    EXPECT_NEAR(tail, 0.0026998, 1e-7);
}
