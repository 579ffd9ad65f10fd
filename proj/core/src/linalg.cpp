#include "canica/linalg.hpp"

#include "canica/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace canica {

namespace {

// SVD of a matrix with rows <= cols.
ThinSvd wide_svd(const MatrixXd& a) {
    const Eigen::Index n = a.rows();
    const Eigen::Index p = a.cols();
    ThinSvd out;
    if (n == 0) {
        out.u.resize(0, 0);
        out.s.resize(0);
        out.v_rows.resize(0, p);
        return out;
    }
    // a^T = Q R, so a = R^T Q^T = L Q^T with L square (n x n).
    Eigen::HouseholderQR<MatrixXd> qr(a.transpose());
    const MatrixXd lower =
        qr.matrixQR().topRows(n).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    Eigen::BDCSVD<MatrixXd> svd(lower, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("SVD failed to converge");
    }
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    MatrixXd padded = MatrixXd::Zero(p, n);
    padded.topRows(n) = svd.matrixV();
    out.v_rows = (qr.householderQ() * padded).transpose();
    return out;
}

}  // namespace

ThinSvd thin_svd(const MatrixXd& a) {
    if (!a.allFinite()) {
        throw NumericalError("SVD input contains non-finite values");
    }
    if (a.rows() <= a.cols()) {
        return wide_svd(a);
    }
    ThinSvd t = wide_svd(a.transpose());
    ThinSvd out;
    out.u = t.v_rows.transpose();
    out.s = std::move(t.s);
    out.v_rows = t.u.transpose();
    return out;
}

Eigen::Index argmax_abs(const Eigen::Ref<const VectorXd>& v) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = std::abs(v[i]);
        if (x > best_abs) {
            best_abs = x;
            best = i;
        }
    }
    return best;
}

void fix_row_signs(MatrixXd& v_rows, MatrixXd* u) {
    for (Eigen::Index r = 0; r < v_rows.rows(); ++r) {
        const Eigen::Index j = argmax_abs(v_rows.row(r).transpose());
        if (v_rows.cols() > 0 && v_rows(r, j) < 0.0) {
            v_rows.row(r) *= -1.0;
            if (u != nullptr && u->cols() > r) u->col(r) *= -1.0;
        }
    }
}

MatrixXd symmetric_decorrelation(const MatrixXd& a) {
    const MatrixXd gram = a * a.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition failed during decorrelation");
    }
    VectorXd inv_sqrt = eig.eigenvalues();
    for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i) {
        if (!(inv_sqrt[i] > 0.0)) {
            throw NumericalError("rank-deficient matrix in symmetric decorrelation");
        }
        inv_sqrt[i] = 1.0 / std::sqrt(inv_sqrt[i]);
    }
    const MatrixXd& q = eig.eigenvectors();
    return q * inv_sqrt.asDiagonal() * q.transpose() * a;
}

namespace {

// Solves (T - mu I) x = b for the symmetric tridiagonal T with diagonal d and
// off-diagonal e, by LU with partial pivoting (LAPACK gttrf/gttrs). Zero
// pivots are replaced by a tiny value, which is what inverse iteration wants.
VectorXd shifted_tridiagonal_solve(const VectorXd& d, const VectorXd& e, double mu, VectorXd b) {
    const Eigen::Index n = d.size();
    const double tiny = std::numeric_limits<double>::epsilon() *
                        std::max(1.0, d.cwiseAbs().maxCoeff() + 2.0 * e.cwiseAbs().maxCoeff());
    VectorXd dd = d.array() - mu;
    if (n == 1) return b / (std::abs(dd[0]) > tiny ? dd[0] : tiny);
    VectorXd dl = e;
    VectorXd du = e;
    VectorXd du2 = VectorXd::Zero(n);
    std::vector<bool> swapped(static_cast<std::size_t>(n - 1), false);
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        if (std::abs(dd[i]) >= std::abs(dl[i])) {
            if (std::abs(dd[i]) < tiny) dd[i] = tiny;
            const double fact = dl[i] / dd[i];
            dl[i] = fact;
            dd[i + 1] -= fact * du[i];
        } else {
            const double fact = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = fact;
            const double temp = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = temp - fact * dd[i + 1];
            if (i < n - 2) {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[static_cast<std::size_t>(i)] = true;
        }
    }
    if (std::abs(dd[n - 1]) < tiny) dd[n - 1] = tiny;
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        if (swapped[static_cast<std::size_t>(i)]) std::swap(b[i], b[i + 1]);
        b[i + 1] -= dl[i] * b[i];
    }
    b[n - 1] /= dd[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2];
    for (Eigen::Index i = n - 3; i >= 0; --i) {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i];
    }
    return b;
}

// Number of eigenvalues of the tridiagonal T strictly below x (Sturm count).
Eigen::Index count_below(const VectorXd& d, const VectorXd& e, double x, double tiny) {
    Eigen::Index count = 0;
    double q = 1.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        q = d[i] - x - (i > 0 ? e[i - 1] * e[i - 1] / q : 0.0);
        if (std::abs(q) < tiny) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

// The k largest eigenvalues of T by bisection, non-increasing.
VectorXd top_tridiagonal_eigenvalues(const VectorXd& d, const VectorXd& e, Eigen::Index k) {
    const Eigen::Index n = d.size();
    double lo = d[0];
    double hi = d[0];
    for (Eigen::Index i = 0; i < n; ++i) {
        const double radius = (i > 0 ? std::abs(e[i - 1]) : 0.0) + (i < n - 1 ? std::abs(e[i]) : 0.0);
        lo = std::min(lo, d[i] - radius);
        hi = std::max(hi, d[i] + radius);
    }
    const double scale = std::max(std::abs(lo), std::abs(hi));
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * scale;
    VectorXd out(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        // Eigenvalue with ascending index n - 1 - j: smallest x with
        // count_below(x) >= n - j.
        double a = lo;
        double b = hi;
        while (b - a > tol) {
            const double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b) break;
            if (count_below(d, e, mid, tiny) >= n - j) {
                b = mid;
            } else {
                a = mid;
            }
        }
        out[j] = 0.5 * (a + b);
        hi = b;
    }
    return out;
}

TopEigen dense_top_eigenpairs(const MatrixXd& a, Eigen::Index k) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
    return {eig.eigenvalues().tail(k).reverse(), eig.eigenvectors().rightCols(k).rowwise().reverse()};
}

}  // namespace

TopEigen top_eigenpairs(const MatrixXd& a, Eigen::Index k) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw DimensionError("top_eigenpairs needs a square matrix");
    k = std::clamp<Eigen::Index>(k, 0, n);
    if (k == 0) return {VectorXd(0), MatrixXd(n, 0)};
    if (!a.allFinite()) throw NumericalError("eigensolver input contains non-finite values");
    if (n <= 32 || 4 * k > n) return dense_top_eigenpairs(a, k);

    Eigen::Tridiagonalization<MatrixXd> tri(a);
    const VectorXd d = tri.diagonal();
    const VectorXd e = tri.subDiagonal();
    const VectorXd lambdas = top_tridiagonal_eigenvalues(d, e, k);

    // Inverse iteration on the tridiagonal form, orthogonalizing against the
    // vectors already found so that clustered eigenvalues still give a basis.
    MatrixXd z(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double lambda = lambdas[j];
        VectorXd x = VectorXd::LinSpaced(n, 1.0, 2.0);
        for (int it = 0; it < 3; ++it) {
            x = shifted_tridiagonal_solve(d, e, lambda, std::move(x));
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index i = 0; i < j; ++i) x -= z.col(i).dot(x) * z.col(i);
            }
            const double norm = x.norm();
            if (!(norm > 0.0) || !std::isfinite(norm)) return dense_top_eigenpairs(a, k);
            x /= norm;
        }
        z.col(j) = x;
    }

    // Back to the original basis, then Rayleigh-Ritz on the k-dim subspace.
    const MatrixXd v = tri.matrixQ() * z;
    Eigen::HouseholderQR<MatrixXd> qr(v);
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, k);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ritz(q.transpose() * a * q);
    if (ritz.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
    return {ritz.eigenvalues().reverse(), q * ritz.eigenvectors().rowwise().reverse()};
}

double max_singular_value(const MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    const MatrixXd gram = a.rows() <= a.cols() ? MatrixXd(a * a.transpose())
                                               : MatrixXd(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition failed");
    }
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double quantile_linear(std::span<const double> values, double q) {
    if (values.empty()) {
        throw ParameterError("quantile of an empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw ParameterError("quantile level must lie in [0, 1]");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean_of(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sd_of(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

double orthonormality_defect(const MatrixXd& rows) {
    if (rows.rows() == 0) return 0.0;
    const MatrixXd gram = rows * rows.transpose();
    return (gram - MatrixXd::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff();
}

}  // namespace canica
