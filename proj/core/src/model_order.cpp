#include "canica/model_order.hpp"

#include "canica/errors.hpp"
#include "canica/linalg.hpp"
#include "canica/parallel.hpp"
#include "canica/rng.hpp"

#include <algorithm>
#include <cmath>

namespace canica {

namespace {

using Indices = std::vector<Eigen::Index>;

Indices resample_frames(Eigen::Index n, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Indices idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return idx;
}

// Leading principal directions of the resampled rows of a matrix X,
// represented implicitly through the Gram matrix K = X X^T. A bootstrap
// replicate repeats frames, so it is stored as its distinct frames `idx` with
// weights sqrt(count): the replicate's voxel-space basis is
// diag(inv_sqrt) * U^T * diag(weight) * X[idx].
struct ReplicateBasis {
    Indices idx;
    VectorXd weight;
    MatrixXd u;           // |idx| x k, eigenvectors of the weighted K[idx, idx]
    VectorXd inv_sqrt;    // k, 0 for numerically null directions
};

ReplicateBasis replicate_basis(const MatrixXd& gram, Indices frames, int k) {
    std::sort(frames.begin(), frames.end());
    ReplicateBasis b;
    std::vector<double> counts;
    for (Eigen::Index f : frames) {
        if (b.idx.empty() || b.idx.back() != f) {
            b.idx.push_back(f);
            counts.push_back(0.0);
        }
        counts.back() += 1.0;
    }
    b.weight = Eigen::Map<const VectorXd>(counts.data(), static_cast<Eigen::Index>(counts.size()))
                   .cwiseSqrt();
    const MatrixXd sub = b.weight.asDiagonal() * gram(b.idx, b.idx) * b.weight.asDiagonal();
    const Eigen::Index n = sub.rows();
    const Eigen::Index kk = std::min<Eigen::Index>(k, n);
    const TopEigen eig = top_eigenpairs(sub, kk);
    b.u = MatrixXd::Zero(n, k);
    b.u.leftCols(kk) = eig.vectors;
    const double top = kk > 0 ? std::max(eig.values[0], 0.0) : 0.0;
    b.inv_sqrt = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < kk; ++i) {
        if (top > 0.0 && eig.values[i] > 1e-12 * top) b.inv_sqrt[i] = 1.0 / std::sqrt(eig.values[i]);
    }
    return b;
}

// Overlap e_j = ||C_j||_F^2 / j for j = 1..k between two replicate bases.
std::vector<double> pair_overlaps(const MatrixXd& gram, const ReplicateBasis& a,
                                  const ReplicateBasis& b, int k) {
    const MatrixXd cross =
        a.weight.asDiagonal() * gram(a.idx, b.idx) * b.weight.asDiagonal();
    const MatrixXd c = a.inv_sqrt.asDiagonal() * (a.u.transpose() * cross * b.u) *
                       b.inv_sqrt.asDiagonal();
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        const double e = c.topLeftCorner(j, j).squaredNorm() / j;
        out[static_cast<std::size_t>(j - 1)] = std::clamp(e, 0.0, 1.0);
    }
    return out;
}

// Gram matrix H H^T of an n x dof standard Gaussian H. Uses the Bartlett
// decomposition when dof >= n, otherwise forms H explicitly.
MatrixXd wishart_identity(Eigen::Index n, Eigen::Index dof, Rng& rng) {
    if (dof < n) {
        const MatrixXd h = gaussian_matrix(n, dof, rng);
        return h * h.transpose();
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd l = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(dof - i));
        l(i, i) = std::sqrt(chi2(rng));
        for (Eigen::Index j = 0; j < i; ++j) l(i, j) = normal(rng);
    }
    return l.triangularView<Eigen::Lower>() * l.transpose();
}

}  // namespace

OrderEstimate estimate_order(const SubjectDataset& dataset, int max_order, int n_replicates,
                             std::uint64_t seed, int jobs) {
    if (!dataset.standardized) {
        throw PreconditionError("order estimation requires a standardized dataset");
    }
    const Eigen::Index n = dataset.n_frames();
    const Eigen::Index p = dataset.n_voxels();
    const Eigen::Index cap = std::min(n, p) - 1;
    if (max_order < 1 || max_order > cap) {
        throw DimensionError("max_order = " + std::to_string(max_order) + " outside [1, " +
                             std::to_string(cap) + "]");
    }
    if (n_replicates < 20) {
        throw ParameterError("order estimation needs at least 20 replicates");
    }

    const MatrixXd& y = dataset.data;
    ThinSvd svd = thin_svd(y);
    const MatrixXd gram = y * y.transpose();
    const auto reps = static_cast<std::size_t>(n_replicates);

    OrderEstimate est;
    est.n_replicates = n_replicates;
    est.max_order = max_order;

    // Observed stability, all candidate orders at once (nested subspaces).
    std::vector<std::vector<double>> observed(reps);
    parallel_for(reps, jobs, [&](std::size_t r) {
        Rng rng = derive_rng(seed, {0, r});
        auto a = replicate_basis(gram, resample_frames(n, rng), max_order);
        auto b = replicate_basis(gram, resample_frames(n, rng), max_order);
        observed[r] = pair_overlaps(gram, a, b, max_order);
    });

    // Baseline noise, shared across orders: G (columns centered), G G^T and
    // V_top G^T per replicate.
    struct NoiseDraw {
        MatrixXd ggt;  // n x n
        MatrixXd vgt;  // max_order x n
    };
    std::vector<NoiseDraw> noise(reps);
    const MatrixXd v_top = svd.v_rows.topRows(max_order);
    // G = H1 V_top + H2 V_perp with H1, H2 i.i.d. Gaussian, so only H1 and the
    // Gram matrix of H2 (Wishart) are needed; centering is applied to both.
    const Eigen::Index perp = p - max_order;
    const MatrixXd centering =
        MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    parallel_for(reps, jobs, [&](std::size_t r) {
        Rng rng = derive_rng(seed, {1, r});
        const MatrixXd h1 = gaussian_matrix(n, max_order, rng);
        const MatrixXd rest = wishart_identity(n, perp, rng);
        const MatrixXd h1c = centering * h1;
        noise[r].ggt = centering * rest * centering + h1c * h1c.transpose();
        noise[r].vgt = h1c.transpose();
    });

    const MatrixXd f = svd.u * svd.s.asDiagonal();  // Y = F V
    const double s1 = svd.s.size() > 0 ? svd.s[0] : 0.0;
    const double dof = static_cast<double>(n - 1) * static_cast<double>(p);

    for (int k = 1; k <= max_order; ++k) {
        if (!(s1 > 0.0) || svd.s[k - 1] <= 1e-10 * s1) break;  // beyond numerical rank

        const double residual_energy = svd.s.tail(svd.s.size() - (k - 1)).squaredNorm();
        const double sigma = std::sqrt(residual_energy / dof);
        const MatrixXd f_head = f.leftCols(k - 1);
        const MatrixXd signal_gram = f_head * f_head.transpose();

        std::vector<double> baseline(reps);
        parallel_for(reps, jobs, [&](std::size_t r) {
            // X = Y_{k-1} + sigma G, with Y_{k-1} = F_head V_head.
            const MatrixXd cross = f_head * noise[r].vgt.topRows(k - 1);
            const MatrixXd gram_x = signal_gram + sigma * (cross + cross.transpose()) +
                                    sigma * sigma * noise[r].ggt;
            Rng rng = derive_rng(seed, {2, static_cast<std::uint64_t>(k), r});
            auto a = replicate_basis(gram_x, resample_frames(n, rng), k);
            auto b = replicate_basis(gram_x, resample_frames(n, rng), k);
            baseline[r] = pair_overlaps(gram_x, a, b, k).back();
        });

        std::vector<double> observed_k(reps);
        for (std::size_t r = 0; r < reps; ++r) observed_k[r] = observed[r][k - 1];
        const double stability = mean_of(observed_k);
        const double threshold = quantile_linear(baseline, kOrderNoisePercentile);
        est.stability_curve.push_back(stability);
        est.noise_curve.push_back(mean_of(baseline));
        est.noise_threshold.push_back(threshold);
        if (!(stability > threshold)) break;
        est.n_sbj = k;
    }
    return est;
}

nlohmann::json to_json(const OrderEstimate& e) {
    nlohmann::json j;
    j["n_sbj"] = e.n_sbj;
    j["stability_curve"] = report_array(e.stability_curve);
    j["noise_curve"] = report_array(e.noise_curve);
    j["noise_threshold"] = report_array(e.noise_threshold);
    j["n_replicates"] = e.n_replicates;
    j["max_order"] = e.max_order;
    return j;
}

}  // namespace canica
