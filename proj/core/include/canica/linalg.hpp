#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace canica {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thin SVD  a = u * diag(s) * v_rows, with k = min(rows, cols) singular
/// triplets sorted by non-increasing singular value. v_rows is k x cols and
/// has orthonormal rows.
struct ThinSvd {
    MatrixXd u;
    VectorXd s;
    MatrixXd v_rows;
};

/// Economy SVD. Wide inputs are first reduced to their square lower factor
/// (a = L * Q with Q having orthonormal rows) so the dense SVD only runs on a
/// min(rows, cols)-sized matrix. Throws NumericalError on non-finite input.
ThinSvd thin_svd(const MatrixXd& a);

/// For every row of v_rows, flips the sign of that row (and the matching column
/// of u, when u is non-empty) so that its entry of largest magnitude is
/// positive. Ties go to the smallest index.
void fix_row_signs(MatrixXd& v_rows, MatrixXd* u = nullptr);

/// Index of the entry of largest absolute value (first one on ties).
Eigen::Index argmax_abs(const Eigen::Ref<const VectorXd>& v);

/// (a a^T)^{-1/2} a, i.e. the symmetric orthogonalization of the rows of a.
MatrixXd symmetric_decorrelation(const MatrixXd& a);

/// Leading eigenpairs of a symmetric matrix, eigenvalues non-increasing.
struct TopEigen {
    VectorXd values;   // k
    MatrixXd vectors;  // n x k, orthonormal columns
};

/// The k largest eigenpairs of a symmetric matrix. For k well below n this
/// tridiagonalizes, finds the k largest eigenvalues by bisection, recovers
/// the k leading eigenvectors by inverse iteration and polishes them with a
/// Rayleigh-Ritz step; otherwise it falls back to the dense solver.
TopEigen top_eigenpairs(const MatrixXd& a, Eigen::Index k);

/// Largest singular value of a matrix via its smaller-side Gram matrix.
double max_singular_value(const MatrixXd& a);

/// Linear-interpolation sample quantile (type 7): q = 0 gives the minimum,
/// q = 1 the maximum. The input is copied and sorted.
double quantile_linear(std::span<const double> values, double q);

double mean_of(std::span<const double> values);
/// Sample standard deviation with denominator n - 1; 0 for fewer than two values.
double sd_of(std::span<const double> values);

/// Max absolute deviation of rows * rows^T from the identity.
double orthonormality_defect(const MatrixXd& rows);

}  // namespace canica
