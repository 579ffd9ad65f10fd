#pragma once

#include "canica/linalg.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canica {

/// One subject's time x voxel matrix. After `standardize`, every column has
/// mean 0 and (biased, 1/n) variance 1, except constant columns which are zeroed
/// and listed in `constant_columns`.
struct SubjectDataset {
    std::string subject_id;
    MatrixXd data;
    bool standardized = false;
    std::vector<Eigen::Index> constant_columns;
    std::optional<std::array<std::int64_t, 3>> grid_shape;
    std::optional<std::vector<std::int64_t>> mask_indices;

    Eigen::Index n_frames() const { return data.rows(); }
    Eigen::Index n_voxels() const { return data.cols(); }
};

enum class Nonlinearity { kLogcosh, kCube };
enum class IcaMode { kSymmetric, kDeflation };

/// Run parameters. Every field has a default; the JSON form uses the member
/// names as keys and rejects anything else.
struct RunConfig {
    std::optional<int> n_sbj;
    double p_value = 0.05;
    int n_bootstrap = 1000;
    Nonlinearity ica_nonlinearity = Nonlinearity::kLogcosh;
    IcaMode ica_mode = IcaMode::kSymmetric;
    int ica_max_iter = 200;
    double ica_tol = 1e-6;
    double map_threshold = 3.0;
    std::uint64_t rng_seed = 0;
    bool use_cca = true;
    // Group order for the fixed-effect variant (or a forced order with CCA).
    std::optional<int> n_grp;
    // Subject-level order estimation.
    int max_order = 20;
    int order_replicates = 100;
    int order_subject = 0;
};

/// Magic bytes opening every binary matrix file.
inline constexpr std::array<char, 8> kMatrixMagic = {'C', 'A', 'N', 'M', 'A', 'T', '0', '1'};

/// Serializes to the binary container: magic, uint64 rows, uint64 cols, then
/// row-major float64 payload, all little-endian.
std::vector<std::byte> encode_matrix(const MatrixXd& m);
/// Parses the binary container or, when the magic is absent, headerless CSV.
MatrixXd decode_matrix(std::span<const std::byte> bytes);

MatrixXd load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const MatrixXd& m);

/// Reads a single-row 0/1 mask and returns the linear indices of the ones.
std::vector<std::int64_t> load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, std::span<const std::int64_t> indices,
               std::int64_t n_voxels);
/// Keeps only the masked columns of each subject and records the indices.
void apply_mask(SubjectDataset& dataset, std::span<const std::int64_t> indices);

/// Centers and variance-normalizes every column. Requires at least 2 frames.
SubjectDataset standardize(const MatrixXd& data, std::string subject_id = {});

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

std::string to_string(Nonlinearity g);
std::string to_string(IcaMode mode);

/// Rounds to 12 significant digits, the precision used in every report.
double report_round(double x);
nlohmann::json report_array(const VectorXd& v);
nlohmann::json report_array(std::span<const double> v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Pretty-printed JSON with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace canica
