#pragma once

#include "canica/dataio.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace canica {

/// Dimensions and noise levels of a synthetic group. JSON keys match the
/// member names.
struct SynthSpec {
    int n_subjects = 8;
    int n_grp = 5;
    int n_sbj = 8;
    int n_frames = 120;
    int n_voxels = 2000;
    double residual_scale = 0.7;        // amplitude of the subject residual R_s
    double noise_scale = 10.0;          // amplitude of the observation noise E_s
    double loading_perturbation = 0.1;  // Lambda_s = [I; 0] + this * Gaussian
    double max_source_corr = 0.05;      // rejection bound on pairwise source correlation
    // Column j of W_s is scaled by exp(spread * N(0, 1)): subject-level
    // variance that differs across subjects and components.
    double time_loading_spread = 0.75;
    bool orthonormal_time_loadings = false;
    std::uint64_t seed = 0;
};

struct SyntheticGroundTruth {
    MatrixXd sources;                         // A: n_grp x n_voxels, standardized Laplace rows
    MatrixXd group_mixing;                    // M: n_grp x n_grp, orthogonal
    std::vector<MatrixXd> subject_loadings;   // Lambda_s: n_sbj x n_grp
    std::vector<MatrixXd> time_loadings;      // W_s: n_frames x n_sbj
    double subject_residual_scale = 0.0;
    double observation_noise_scale = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticGroup {
    std::vector<SubjectDataset> datasets;  // standardized
    SyntheticGroundTruth truth;
    std::vector<std::string> warnings;
};

/// Samples Y_s = W_s (Lambda_s M A + R_s) + E_s for every subject, then
/// standardizes each Y_s. R_s and E_s are i.i.d. Gaussian.
SyntheticGroup generate_group(const SynthSpec& spec);

SynthSpec parse_synth_spec(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

/// Writes sub-XX.canmat per subject plus ground_truth/ (matrices and
/// manifest.json) into `dir`.
void save_synthetic_group(const std::filesystem::path& dir, const SyntheticGroup& group,
                          const SynthSpec& spec);

}  // namespace canica
