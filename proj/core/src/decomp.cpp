#include "canica/decomp.hpp"

#include "canica/errors.hpp"

#include <algorithm>

namespace canica {

SubjectDecomposition subject_svd(const SubjectDataset& dataset, int n_sbj) {
    if (!dataset.standardized) {
        throw PreconditionError("subject " + dataset.subject_id + " is not standardized");
    }
    const Eigen::Index rank_cap = std::min(dataset.n_frames(), dataset.n_voxels());
    if (n_sbj < 1 || n_sbj > rank_cap) {
        throw DimensionError("n_sbj = " + std::to_string(n_sbj) + " outside [1, " +
                             std::to_string(rank_cap) + "]");
    }
    ThinSvd svd = thin_svd(dataset.data);
    fix_row_signs(svd.v_rows, &svd.u);

    SubjectDecomposition d;
    d.subject_id = dataset.subject_id;
    d.n_sbj = n_sbj;
    d.singular_values = svd.s;
    d.patterns = svd.v_rows.topRows(n_sbj);
    d.loadings = svd.u.leftCols(n_sbj) * svd.s.head(n_sbj).asDiagonal();
    d.noise_basis = svd.v_rows.bottomRows(rank_cap - n_sbj);
    return d;
}

MatrixXd whitened_patterns(const SubjectDecomposition& d) { return d.patterns; }

MatrixXd variance_weighted_patterns(const SubjectDecomposition& d) {
    return d.singular_values.head(d.n_sbj).asDiagonal() * d.patterns;
}

MatrixXd residual(const SubjectDataset& dataset, const SubjectDecomposition& d) {
    if (dataset.n_voxels() != d.n_voxels() || dataset.n_frames() != d.loadings.rows()) {
        throw DimensionError("decomposition does not match dataset shape");
    }
    return dataset.data - d.loadings * d.patterns;
}

void save_decomposition(const std::filesystem::path& dir, const SubjectDecomposition& d) {
    std::filesystem::create_directories(dir);
    save_matrix(dir / "patterns.canmat", d.patterns);
    save_matrix(dir / "loadings.canmat", d.loadings);
    save_matrix(dir / "singular_values.canmat", MatrixXd(d.singular_values.transpose()));
    save_matrix(dir / "noise_basis.canmat", d.noise_basis);
    nlohmann::json manifest;
    manifest["kind"] = "SubjectDecomposition";
    manifest["subject_id"] = d.subject_id;
    manifest["n_sbj"] = d.n_sbj;
    manifest["files"] = {{"patterns", "patterns.canmat"},
                         {"loadings", "loadings.canmat"},
                         {"singular_values", "singular_values.canmat"},
                         {"noise_basis", "noise_basis.canmat"}};
    write_json_file(dir / "manifest.json", manifest);
}

SubjectDecomposition load_decomposition(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.value("kind", "") != "SubjectDecomposition") {
        throw FormatError("manifest is not a SubjectDecomposition", 0);
    }
    const auto& files = manifest.at("files");
    SubjectDecomposition d;
    d.subject_id = manifest.value("subject_id", "");
    d.n_sbj = manifest.at("n_sbj").get<int>();
    d.patterns = load_matrix(dir / files.at("patterns").get<std::string>());
    d.loadings = load_matrix(dir / files.at("loadings").get<std::string>());
    d.singular_values = load_matrix(dir / files.at("singular_values").get<std::string>()).row(0).transpose();
    d.noise_basis = load_matrix(dir / files.at("noise_basis").get<std::string>());
    if (d.patterns.rows() != d.n_sbj || d.loadings.cols() != d.n_sbj ||
        d.noise_basis.cols() != d.patterns.cols()) {
        throw DimensionError("decomposition files have inconsistent shapes");
    }
    return d;
}

}  // namespace canica
