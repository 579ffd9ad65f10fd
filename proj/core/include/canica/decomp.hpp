#pragma once

#include "canica/dataio.hpp"
#include "canica/linalg.hpp"

#include <filesystem>
#include <string>

namespace canica {

/// Subject-level principal components: Y = loadings * patterns + residual.
///
/// patterns are the leading right singular vectors (rows, orthonormal),
/// loadings the matching columns of U * Sigma (time courses), and
/// noise_basis the trailing right singular vectors that span the rejected
/// observation-noise subspace. Each singular pair is sign-normalized so that
/// the largest-magnitude entry of its voxel-space row is positive.
struct SubjectDecomposition {
    std::string subject_id;
    MatrixXd patterns;        // n_sbj x n_voxels
    MatrixXd loadings;        // n_frames x n_sbj
    VectorXd singular_values; // min(n_frames, n_voxels), non-increasing
    MatrixXd noise_basis;     // (min(n_frames, n_voxels) - n_sbj) x n_voxels
    int n_sbj = 0;

    Eigen::Index n_voxels() const { return patterns.cols(); }
};

SubjectDecomposition subject_svd(const SubjectDataset& dataset, int n_sbj);

/// The retained patterns as they enter the CCA: already unit singular spectrum.
MatrixXd whitened_patterns(const SubjectDecomposition& d);

/// Patterns scaled by their singular values (fixed-effect variant).
MatrixXd variance_weighted_patterns(const SubjectDecomposition& d);

/// Y - loadings * patterns.
MatrixXd residual(const SubjectDataset& dataset, const SubjectDecomposition& d);

/// Writes one matrix file per field plus manifest.json into `dir`.
void save_decomposition(const std::filesystem::path& dir, const SubjectDecomposition& d);
SubjectDecomposition load_decomposition(const std::filesystem::path& dir);

}  // namespace canica
