#include "canica/ica.hpp"

#include "canica/errors.hpp"
#include "canica/linalg.hpp"
#include "canica/rng.hpp"

#include <algorithm>
#include <cmath>

namespace canica {

namespace {

constexpr double kWhitenedTolerance = 1e-6;
constexpr double kSkewFloor = 1e-3;

// Applies g and g' elementwise to projections u (rows = components).
void apply_nonlinearity(Nonlinearity nl, const MatrixXd& u, MatrixXd& g, MatrixXd& g_prime) {
    if (nl == Nonlinearity::kLogcosh) {
        g = u.array().tanh();
        g_prime = 1.0 - g.array().square();
    } else {
        g = u.array().cube();
        g_prime = 3.0 * u.array().square();
    }
}

int run_symmetric(const MatrixXd& z, Nonlinearity nl, int max_iter, double tol, MatrixXd& w,
                  bool& converged) {
    const double p = static_cast<double>(z.cols());
    w = symmetric_decorrelation(w);
    MatrixXd g, g_prime;
    converged = false;
    int it = 0;
    while (it < max_iter) {
        ++it;
        const MatrixXd u = w * z;
        apply_nonlinearity(nl, u, g, g_prime);
        const VectorXd mean_g_prime = g_prime.rowwise().mean();
        MatrixXd w_new = (g * z.transpose()) / p - mean_g_prime.asDiagonal() * w;
        w_new = symmetric_decorrelation(w_new);
        const double lim =
            (1.0 - (w_new * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
        w = std::move(w_new);
        if (lim < tol) {
            converged = true;
            break;
        }
    }
    return it;
}

int run_deflation(const MatrixXd& z, Nonlinearity nl, int max_iter, double tol, MatrixXd& w,
                  bool& converged) {
    const Eigen::Index n = z.rows();
    const double p = static_cast<double>(z.cols());
    converged = true;
    int worst = 0;
    MatrixXd g, g_prime;
    auto orthogonalize = [&](VectorXd& v, Eigen::Index c) {
        for (Eigen::Index j = 0; j < c; ++j) v -= v.dot(w.row(j).transpose()) * w.row(j).transpose();
        const double norm = v.norm();
        if (!(norm > 0.0)) throw NumericalError("deflation produced a null direction");
        v /= norm;
    };
    for (Eigen::Index c = 0; c < n; ++c) {
        VectorXd v = w.row(c).transpose();
        orthogonalize(v, c);
        bool done = false;
        int it = 0;
        while (it < max_iter) {
            ++it;
            const MatrixXd u = v.transpose() * z;  // 1 x p
            apply_nonlinearity(nl, u, g, g_prime);
            VectorXd v_new = (z * g.transpose()) / p - g_prime.mean() * v;
            orthogonalize(v_new, c);
            const double lim = std::abs(1.0 - std::abs(v_new.dot(v)));
            v = std::move(v_new);
            if (lim < tol) {
                done = true;
                break;
            }
        }
        w.row(c) = v.transpose();
        worst = std::max(worst, it);
        converged = converged && done;
    }
    return worst;
}

}  // namespace

ComponentMaps fastica(const MatrixXd& subspace, Nonlinearity nonlinearity, IcaMode mode,
                      int max_iter, double tol, std::uint64_t seed) {
    const Eigen::Index n = subspace.rows();
    const Eigen::Index p = subspace.cols();
    if (n == 0) throw DimensionError("FastICA needs at least one component");
    if (p < 2) throw DimensionError("FastICA needs at least two voxels");
    if (max_iter < 1) throw ParameterError("max_iter must be positive");
    if (!(tol > 0.0)) throw ParameterError("tol must be positive");
    if (!subspace.allFinite()) throw NumericalError("FastICA input contains non-finite values");
    const double defect = orthonormality_defect(subspace);
    if (defect > kWhitenedTolerance) {
        throw PreconditionError("FastICA input rows are not orthonormal (defect " +
                                std::to_string(defect) + ")");
    }

    // Center over voxels, then whiten to unit covariance.
    const VectorXd mean = subspace.rowwise().mean();
    const MatrixXd centered = subspace.colwise() - mean;
    const MatrixXd cov = centered * centered.transpose() / static_cast<double>(p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
        throw NumericalError("subspace covariance is singular after centering");
    }
    const MatrixXd& q = eig.eigenvectors();
    const VectorXd root = eig.eigenvalues().cwiseSqrt();
    const MatrixXd whitening = q * root.cwiseInverse().asDiagonal() * q.transpose();
    const MatrixXd dewhitening = q * root.asDiagonal() * q.transpose();
    const MatrixXd z = whitening * centered;

    Rng rng = derive_rng(seed);
    MatrixXd w = gaussian_matrix(n, n, rng);

    ComponentMaps out;
    if (mode == IcaMode::kSymmetric) {
        out.n_iterations = run_symmetric(z, nonlinearity, max_iter, tol, w, out.converged);
    } else {
        out.n_iterations = run_deflation(z, nonlinearity, max_iter, tol, w, out.converged);
    }

    MatrixXd sources = w * z;
    VectorXd scale(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = sources.row(i).mean();
        sources.row(i).array() -= mu;
        const double sd = std::sqrt(sources.row(i).squaredNorm() / static_cast<double>(p));
        if (!(sd > 0.0)) throw NumericalError("FastICA produced a constant source");
        sources.row(i) /= sd;
        scale[i] = sd;
        const double skew = sources.row(i).array().cube().mean();
        bool flip = skew < 0.0;
        if (std::abs(skew) < kSkewFloor) {
            flip = sources(i, argmax_abs(sources.row(i).transpose())) < 0.0;
        }
        if (flip) {
            sources.row(i) *= -1.0;
            scale[i] = -scale[i];
        }
    }
    // centered = dewhitening * W^T * diag(scale) * maps
    out.maps = std::move(sources);
    out.unmixing = w;
    out.mixing = dewhitening * w.transpose() * scale.asDiagonal();
    return threshold_maps(std::move(out), 0.0);
}

ComponentMaps threshold_maps(ComponentMaps maps, double tau) {
    if (!(tau >= 0.0)) throw ParameterError("threshold must be >= 0");
    maps.threshold = tau;
    maps.supports.assign(static_cast<std::size_t>(maps.maps.rows()), {});
    for (Eigen::Index i = 0; i < maps.maps.rows(); ++i) {
        auto& support = maps.supports[static_cast<std::size_t>(i)];
        for (Eigen::Index v = 0; v < maps.maps.cols(); ++v) {
            if (std::abs(maps.maps(i, v)) > tau) support.push_back(v);
        }
    }
    return maps;
}

MatrixXd thresholded_values(const ComponentMaps& maps) {
    MatrixXd out = MatrixXd::Zero(maps.maps.rows(), maps.maps.cols());
    for (std::size_t i = 0; i < maps.supports.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (Eigen::Index v : maps.supports[i]) out(row, v) = maps.maps(row, v);
    }
    return out;
}

void save_component_maps(const std::filesystem::path& dir, const ComponentMaps& maps) {
    std::filesystem::create_directories(dir);
    save_matrix(dir / "maps.canmat", maps.maps);
    save_matrix(dir / "mixing.canmat", maps.mixing);
    save_matrix(dir / "unmixing.canmat", maps.unmixing);
    nlohmann::json manifest = summary_json(maps);
    manifest["kind"] = "ComponentMaps";
    manifest["threshold"] = maps.threshold;
    manifest["files"] = {{"maps", "maps.canmat"},
                         {"mixing", "mixing.canmat"},
                         {"unmixing", "unmixing.canmat"}};
    write_json_file(dir / "manifest.json", manifest);
}

ComponentMaps load_component_maps(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.value("kind", "") != "ComponentMaps") {
        throw FormatError("manifest is not a ComponentMaps", 0);
    }
    const auto& files = manifest.at("files");
    ComponentMaps m;
    m.maps = load_matrix(dir / files.at("maps").get<std::string>());
    m.mixing = load_matrix(dir / files.at("mixing").get<std::string>());
    m.unmixing = load_matrix(dir / files.at("unmixing").get<std::string>());
    m.converged = manifest.at("converged").get<bool>();
    m.n_iterations = manifest.at("n_iterations").get<int>();
    return threshold_maps(std::move(m), manifest.at("threshold").get<double>());
}

nlohmann::json summary_json(const ComponentMaps& maps) {
    nlohmann::json j;
    j["n_comp"] = maps.n_comp();
    j["threshold"] = report_round(maps.threshold);
    j["converged"] = maps.converged;
    j["n_iterations"] = maps.n_iterations;
    auto supports = nlohmann::json::array();
    for (const auto& s : maps.supports) supports.push_back(s);
    j["supports"] = supports;
    return j;
}

}  // namespace canica
