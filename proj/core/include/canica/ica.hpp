#pragma once

#include "canica/dataio.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace canica {

/// Independent component maps of a group subspace.
///
/// Each row of `maps` has mean 0 and (biased) variance 1 over voxels; the
/// voxel-centered subspace equals mixing * maps. `supports[i]` lists the
/// voxels with |maps(i, v)| > threshold, in increasing order.
struct ComponentMaps {
    MatrixXd maps;     // n_comp x n_voxels
    MatrixXd mixing;   // n_comp x n_comp
    MatrixXd unmixing; // n_comp x n_comp rotation in the whitened space
    double threshold = 0.0;
    std::vector<std::vector<Eigen::Index>> supports;
    bool converged = false;
    int n_iterations = 0;

    Eigen::Index n_comp() const { return maps.rows(); }
};

/// Fixed-point FastICA with voxels as samples. The input rows must be
/// orthonormal within 1e-6; they are centered over voxels and re-whitened
/// before the rotation is estimated. Non-convergence is reported through
/// `converged` rather than thrown.
ComponentMaps fastica(const MatrixXd& subspace, Nonlinearity nonlinearity, IcaMode mode,
                      int max_iter, double tol, std::uint64_t seed);

/// Recomputes supports for a new amplitude threshold; maps are unchanged.
ComponentMaps threshold_maps(ComponentMaps maps, double tau);

/// Maps with every voxel outside its support set to zero.
MatrixXd thresholded_values(const ComponentMaps& maps);

void save_component_maps(const std::filesystem::path& dir, const ComponentMaps& maps);
ComponentMaps load_component_maps(const std::filesystem::path& dir);
nlohmann::json summary_json(const ComponentMaps& maps);

}  // namespace canica
