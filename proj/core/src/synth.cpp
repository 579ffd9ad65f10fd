#include "canica/synth.hpp"

#include "canica/errors.hpp"
#include "canica/linalg.hpp"
#include "canica/rng.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace canica {

namespace {

constexpr int kMaxRejections = 1000;

MatrixXd standardize_rows(MatrixXd a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        a.row(i).array() -= a.row(i).mean();
        a.row(i) /= std::sqrt(a.row(i).squaredNorm() / static_cast<double>(a.cols()));
    }
    return a;
}

double max_offdiag_corr(const MatrixXd& standardized) {
    const MatrixXd c = standardized * standardized.transpose() / static_cast<double>(standardized.cols());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j) worst = std::max(worst, std::abs(c(i, j)));
    return worst;
}

std::string subject_name(std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sub-%02zu", s + 1);
    return buf;
}

}  // namespace

SyntheticGroup generate_group(const SynthSpec& spec) {
    if (spec.n_subjects < 1 || spec.n_grp < 1 || spec.n_sbj < 1 || spec.n_frames < 2 ||
        spec.n_voxels < 2) {
        throw DimensionError("synthetic dimensions must be positive (n_frames, n_voxels >= 2)");
    }
    if (spec.n_grp > spec.n_voxels) {
        throw DimensionError("n_grp exceeds n_voxels");
    }
    if (!(spec.residual_scale >= 0.0) || !(spec.noise_scale >= 0.0) ||
        !(spec.loading_perturbation >= 0.0) || !(spec.time_loading_spread >= 0.0)) {
        throw ParameterError("synthetic scales must be >= 0");
    }
    if (spec.orthonormal_time_loadings && spec.n_sbj > spec.n_frames) {
        throw DimensionError("orthonormal time loadings need n_sbj <= n_frames");
    }

    SyntheticGroup out;
    if (spec.n_sbj < spec.n_grp) {
        out.warnings.push_back("n_sbj < n_grp: subjects cannot express every group pattern");
    }
    auto& truth = out.truth;
    truth.seed = spec.seed;
    truth.subject_residual_scale = spec.residual_scale;
    truth.observation_noise_scale = spec.noise_scale;

    Rng group_rng = derive_rng(spec.seed, {0});
    int attempts = 0;
    do {
        if (++attempts > kMaxRejections) {
            throw ParameterError("could not draw sources with pairwise |corr| below " +
                                 std::to_string(spec.max_source_corr));
        }
        truth.sources = standardize_rows(laplace_matrix(spec.n_grp, spec.n_voxels, group_rng));
    } while (spec.n_grp > 1 && max_offdiag_corr(truth.sources) >= spec.max_source_corr);

    // Haar-distributed orthogonal M: QR of a Gaussian matrix with the signs of
    // R's diagonal folded into Q.
    {
        Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(spec.n_grp, spec.n_grp, group_rng));
        MatrixXd q = qr.householderQ();
        const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
            if (r(j, j) < 0.0) q.col(j) *= -1.0;
        }
        truth.group_mixing = std::move(q);
    }

    const MatrixXd group_patterns = truth.group_mixing * truth.sources;  // B = M A

    const auto n_subjects = static_cast<std::size_t>(spec.n_subjects);
    out.datasets.resize(n_subjects);
    truth.subject_loadings.resize(n_subjects);
    truth.time_loadings.resize(n_subjects);
    for (std::size_t s = 0; s < n_subjects; ++s) {
        Rng rng = derive_rng(spec.seed, {1, s});
        MatrixXd lambda;
        attempts = 0;
        do {
            if (++attempts > kMaxRejections) {
                throw NumericalError("could not draw a full-rank subject loading matrix");
            }
            lambda = MatrixXd::Identity(spec.n_sbj, spec.n_grp) +
                     spec.loading_perturbation * gaussian_matrix(spec.n_sbj, spec.n_grp, rng);
        } while (std::min(spec.n_sbj, spec.n_grp) == spec.n_grp &&
                 thin_svd(lambda).s.minCoeff() <= 1e-8);

        MatrixXd w = gaussian_matrix(spec.n_frames, spec.n_sbj, rng);
        if (spec.orthonormal_time_loadings) {
            Eigen::HouseholderQR<MatrixXd> qr(w);
            w = qr.householderQ() * MatrixXd::Identity(spec.n_frames, spec.n_sbj);
        }
        if (spec.time_loading_spread > 0.0) {
            const MatrixXd log_scale = gaussian_matrix(1, spec.n_sbj, rng);
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w.col(j) *= std::exp(spec.time_loading_spread * log_scale(0, j));
            }
        }
        const MatrixXd residual = gaussian_matrix(spec.n_sbj, spec.n_voxels, rng);
        const MatrixXd noise = gaussian_matrix(spec.n_frames, spec.n_voxels, rng);
        const MatrixXd patterns = lambda * group_patterns + spec.residual_scale * residual;
        const MatrixXd y = w * patterns + spec.noise_scale * noise;

        out.datasets[s] = standardize(y, subject_name(s));
        truth.subject_loadings[s] = std::move(lambda);
        truth.time_loadings[s] = std::move(w);
    }
    return out;
}

SynthSpec parse_synth_spec(const nlohmann::json& j) {
    static const std::set<std::string> kKeys = {
        "n_subjects",       "n_grp",          "n_sbj",
        "n_frames",         "n_voxels",       "residual_scale",
        "noise_scale",      "loading_perturbation", "max_source_corr",
        "time_loading_spread", "orthonormal_time_loadings", "seed"};
    if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.contains(key)) throw ConfigError("unknown synthetic spec key \"" + key + "\"");
    }
    SynthSpec s;
    try {
        s.n_subjects = j.value("n_subjects", s.n_subjects);
        s.n_grp = j.value("n_grp", s.n_grp);
        s.n_sbj = j.value("n_sbj", s.n_sbj);
        s.n_frames = j.value("n_frames", s.n_frames);
        s.n_voxels = j.value("n_voxels", s.n_voxels);
        s.residual_scale = j.value("residual_scale", s.residual_scale);
        s.noise_scale = j.value("noise_scale", s.noise_scale);
        s.loading_perturbation = j.value("loading_perturbation", s.loading_perturbation);
        s.max_source_corr = j.value("max_source_corr", s.max_source_corr);
        s.time_loading_spread = j.value("time_loading_spread", s.time_loading_spread);
        s.orthonormal_time_loadings =
            j.value("orthonormal_time_loadings", s.orthonormal_time_loadings);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec has a value of the wrong type: ") + e.what());
    }
    return s;
}

nlohmann::json to_json(const SynthSpec& s) {
    return {{"n_subjects", s.n_subjects},
            {"n_grp", s.n_grp},
            {"n_sbj", s.n_sbj},
            {"n_frames", s.n_frames},
            {"n_voxels", s.n_voxels},
            {"residual_scale", report_round(s.residual_scale)},
            {"noise_scale", report_round(s.noise_scale)},
            {"loading_perturbation", report_round(s.loading_perturbation)},
            {"max_source_corr", report_round(s.max_source_corr)},
            {"time_loading_spread", report_round(s.time_loading_spread)},
            {"orthonormal_time_loadings", s.orthonormal_time_loadings},
            {"seed", s.seed}};
}

void save_synthetic_group(const std::filesystem::path& dir, const SyntheticGroup& group,
                          const SynthSpec& spec) {
    std::filesystem::create_directories(dir / "ground_truth");
    nlohmann::json manifest;
    manifest["kind"] = "SyntheticGroundTruth";
    manifest["spec"] = to_json(spec);
    manifest["sources"] = "sources.canmat";
    manifest["group_mixing"] = "group_mixing.canmat";
    manifest["subjects"] = nlohmann::json::array();
    save_matrix(dir / "ground_truth" / "sources.canmat", group.truth.sources);
    save_matrix(dir / "ground_truth" / "group_mixing.canmat", group.truth.group_mixing);
    for (std::size_t s = 0; s < group.datasets.size(); ++s) {
        const auto& id = group.datasets[s].subject_id;
        save_matrix(dir / (id + ".canmat"), group.datasets[s].data);
        save_matrix(dir / "ground_truth" / (id + "_loadings.canmat"), group.truth.subject_loadings[s]);
        save_matrix(dir / "ground_truth" / (id + "_time_loadings.canmat"), group.truth.time_loadings[s]);
        manifest["subjects"].push_back({{"subject_id", id},
                                        {"data", id + ".canmat"},
                                        {"subject_loadings", id + "_loadings.canmat"},
                                        {"time_loadings", id + "_time_loadings.canmat"}});
    }
    manifest["warnings"] = group.warnings;
    write_json_file(dir / "ground_truth" / "manifest.json", manifest);
}

}  // namespace canica
