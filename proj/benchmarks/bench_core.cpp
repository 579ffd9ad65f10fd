#include "canica/decomp.hpp"
#include "canica/group_cca.hpp"
#include "canica/ica.hpp"
#include "canica/linalg.hpp"
#include "canica/model_order.hpp"
#include "canica/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace canica;

SubjectDataset subject(Eigen::Index frames, Eigen::Index voxels, std::uint64_t seed) {
    Rng rng = derive_rng(seed);
    return standardize(gaussian_matrix(frames, voxels, rng), "sub-" + std::to_string(seed));
}

void BM_SubjectSvd(benchmark::State& state) {
    const auto ds = subject(state.range(0), state.range(1), 1);
    for (auto _ : state) benchmark::DoNotOptimize(subject_svd(ds, 10));
}
BENCHMARK(BM_SubjectSvd)->Args({120, 2000})->Args({200, 20000})->Unit(benchmark::kMillisecond);

void BM_TopEigenpairs(benchmark::State& state) {
    const auto n = state.range(0);
    Rng rng = derive_rng(2);
    const MatrixXd g = gaussian_matrix(n, 2 * n, rng);
    const MatrixXd a = g * g.transpose();
    for (auto _ : state) benchmark::DoNotOptimize(top_eigenpairs(a, 10));
}
BENCHMARK(BM_TopEigenpairs)->Arg(128)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_BootstrapNull(benchmark::State& state) {
    std::vector<SubjectDecomposition> decomps;
    for (std::uint64_t s = 0; s < 8; ++s) decomps.push_back(subject_svd(subject(120, 2000, s), 8));
    for (auto _ : state) {
        benchmark::DoNotOptimize(bootstrap_null(decomps, static_cast<int>(state.range(0)), 0.05, 0));
    }
}
BENCHMARK(BM_BootstrapNull)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FastIca(benchmark::State& state) {
    Rng rng = derive_rng(3);
    const MatrixXd x = laplace_matrix(state.range(0), 20000, rng);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(x * x.transpose());
    const MatrixXd z = eig.operatorInverseSqrt() * x;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fastica(z, Nonlinearity::kLogcosh, IcaMode::kSymmetric, 200, 1e-6, 0));
    }
}
BENCHMARK(BM_FastIca)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EstimateOrder(benchmark::State& state) {
    const auto ds = subject(120, 2000, 4);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_order(ds, 10, 100, 0));
}
BENCHMARK(BM_EstimateOrder)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
