#include "canica/group_cca.hpp"

#include "canica/errors.hpp"
#include "canica/linalg.hpp"
#include "canica/parallel.hpp"
#include "canica/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace canica {

namespace {

void check_group(std::span<const SubjectDecomposition> decomps) {
    if (decomps.size() < 2) {
        throw InsufficientSubjectsError("at least 2 subjects required");
    }
    const Eigen::Index p = decomps.front().n_voxels();
    for (const auto& d : decomps) {
        if (d.n_voxels() != p) {
            throw DimensionError("subject " + d.subject_id + " has " +
                                 std::to_string(d.n_voxels()) + " voxels, expected " +
                                 std::to_string(p));
        }
        if (d.n_sbj < 1 || d.patterns.rows() != d.n_sbj) {
            throw DimensionError("subject " + d.subject_id + " has no retained patterns");
        }
    }
}

MatrixXd stack_patterns(std::span<const SubjectDecomposition> decomps, bool whitened) {
    Eigen::Index rows = 0;
    for (const auto& d : decomps) rows += d.n_sbj;
    MatrixXd stacked(rows, decomps.front().n_voxels());
    Eigen::Index at = 0;
    for (const auto& d : decomps) {
        stacked.middleRows(at, d.n_sbj) =
            whitened ? whitened_patterns(d) : variance_weighted_patterns(d);
        at += d.n_sbj;
    }
    return stacked;
}

int count_above(const VectorXd& z, double threshold) {
    return static_cast<int>((z.array() > threshold).count());
}

}  // namespace

std::vector<double> bootstrap_null_samples(std::span<const SubjectDecomposition> decomps,
                                           int n_bootstrap, std::uint64_t seed, int jobs) {
    check_group(decomps);
    if (n_bootstrap < 100) {
        throw ParameterError("bootstrap null needs at least 100 replicates, got " +
                             std::to_string(n_bootstrap));
    }
    Eigen::Index noise_rows = 0;
    std::vector<Eigen::Index> offsets;
    for (const auto& d : decomps) {
        if (d.noise_basis.rows() < d.n_sbj) {
            throw InsufficientNoiseError("subject " + d.subject_id + " has " +
                                         std::to_string(d.noise_basis.rows()) +
                                         " noise directions, needs at least " +
                                         std::to_string(d.n_sbj));
        }
        offsets.push_back(noise_rows);
        noise_rows += d.noise_basis.rows();
    }
    // Inner products between all noise directions; each replicate's stacked
    // matrix has Gram equal to a principal submatrix of this.
    MatrixXd noise(noise_rows, decomps.front().n_voxels());
    for (std::size_t s = 0; s < decomps.size(); ++s) {
        noise.middleRows(offsets[s], decomps[s].noise_basis.rows()) = decomps[s].noise_basis;
    }
    MatrixXd gram = MatrixXd::Zero(noise_rows, noise_rows);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(noise);
    gram = gram.selfadjointView<Eigen::Lower>();

    std::vector<double> z0(static_cast<std::size_t>(n_bootstrap));
    parallel_for(z0.size(), jobs, [&](std::size_t r) {
        Rng rng = derive_rng(seed, {r});
        std::vector<Eigen::Index> idx;
        for (std::size_t s = 0; s < decomps.size(); ++s) {
            const Eigen::Index pool = decomps[s].noise_basis.rows();
            std::vector<Eigen::Index> order(static_cast<std::size_t>(pool));
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            // Partial Fisher-Yates: first n_sbj entries are a uniform draw
            // without replacement.
            for (int i = 0; i < decomps[s].n_sbj; ++i) {
                std::uniform_int_distribution<Eigen::Index> pick(i, pool - 1);
                std::swap(order[static_cast<std::size_t>(i)],
                          order[static_cast<std::size_t>(pick(rng))]);
                idx.push_back(offsets[s] + order[static_cast<std::size_t>(i)]);
            }
        }
        const MatrixXd sub = gram(idx, idx);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sub, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success) {
            throw NumericalError("eigendecomposition failed in bootstrap replicate");
        }
        z0[r] = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
    });
    return z0;
}

double bootstrap_null(std::span<const SubjectDecomposition> decomps, int n_bootstrap,
                      double p_value, std::uint64_t seed, int jobs) {
    if (!(p_value >= 0.0 && p_value < 1.0)) {
        throw ParameterError("p_value must lie in [0, 1)");
    }
    const auto z0 = bootstrap_null_samples(decomps, n_bootstrap, seed, jobs);
    return quantile_linear(z0, 1.0 - p_value);
}

GroupModel fit_group_subspace(std::span<const SubjectDecomposition> decomps, bool use_cca,
                              double p_value, int n_bootstrap, std::uint64_t seed,
                              std::optional<int> forced_n_grp, int jobs) {
    check_group(decomps);
    if (forced_n_grp && *forced_n_grp < 0) {
        throw ParameterError("n_grp must be non-negative");
    }

    const MatrixXd stacked = stack_patterns(decomps, use_cca);
    ThinSvd svd = thin_svd(stacked);
    fix_row_signs(svd.v_rows, &svd.u);

    GroupModel model;
    model.used_cca = use_cca;
    model.canonical_correlations = svd.s;

    const bool need_threshold = use_cca || !forced_n_grp;
    if (need_threshold) {
        model.z_threshold = bootstrap_null(decomps, n_bootstrap, p_value, seed, jobs);
    }
    if (forced_n_grp) {
        model.n_grp = *forced_n_grp;
    } else if (use_cca) {
        model.n_grp = count_above(model.canonical_correlations, model.z_threshold);
    } else {
        const ThinSvd cca = thin_svd(stack_patterns(decomps, true));
        model.n_grp = count_above(cca.s, model.z_threshold);
    }
    if (model.n_grp > svd.v_rows.rows()) {
        throw DimensionError("n_grp = " + std::to_string(model.n_grp) + " exceeds the " +
                             std::to_string(svd.v_rows.rows()) + " available canonical variables");
    }
    model.group_patterns = svd.v_rows.topRows(model.n_grp);
    model.canonical_weights = svd.u.leftCols(model.n_grp);
    return model;
}

void save_group_model(const std::filesystem::path& dir, const GroupModel& model) {
    std::filesystem::create_directories(dir);
    save_matrix(dir / "group_patterns.canmat", model.group_patterns);
    save_matrix(dir / "canonical_weights.canmat", model.canonical_weights);
    save_matrix(dir / "canonical_correlations.canmat",
                MatrixXd(model.canonical_correlations.transpose()));
    nlohmann::json manifest = summary_json(model);
    manifest["kind"] = "GroupModel";
    manifest["z_threshold"] = model.z_threshold;
    manifest["files"] = {{"group_patterns", "group_patterns.canmat"},
                         {"canonical_weights", "canonical_weights.canmat"},
                         {"canonical_correlations", "canonical_correlations.canmat"}};
    write_json_file(dir / "manifest.json", manifest);
}

GroupModel load_group_model(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.value("kind", "") != "GroupModel") {
        throw FormatError("manifest is not a GroupModel", 0);
    }
    const auto& files = manifest.at("files");
    GroupModel m;
    m.n_grp = manifest.at("n_grp").get<int>();
    m.z_threshold = manifest.at("z_threshold").get<double>();
    m.used_cca = manifest.at("used_cca").get<bool>();
    m.group_patterns = load_matrix(dir / files.at("group_patterns").get<std::string>());
    m.canonical_weights = load_matrix(dir / files.at("canonical_weights").get<std::string>());
    m.canonical_correlations =
        load_matrix(dir / files.at("canonical_correlations").get<std::string>()).row(0).transpose();
    if (m.group_patterns.rows() != m.n_grp || m.canonical_weights.cols() != m.n_grp) {
        throw DimensionError("group model files disagree with n_grp");
    }
    return m;
}

nlohmann::json summary_json(const GroupModel& model) {
    nlohmann::json j;
    j["n_grp"] = model.n_grp;
    j["z_threshold"] = report_round(model.z_threshold);
    j["used_cca"] = model.used_cca;
    j["canonical_correlations"] = report_array(model.canonical_correlations);
    return j;
}

}  // namespace canica
