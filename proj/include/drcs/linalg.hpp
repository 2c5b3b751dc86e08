#pragma once

#include <Eigen/Dense>

namespace drcs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues are clamped to zero.
MatrixXd sym_sqrt(const MatrixXd& m);

/// Smallest eigenvalue of the symmetric part of `m`.
double min_eigenvalue(const MatrixXd& m);
double max_eigenvalue(const MatrixXd& m);

/// True iff `m` is square, symmetric to `tol` (relative to its scale) and has no eigenvalue below -tol.
bool is_symmetric_psd(const MatrixXd& m, double tol = 1e-10);

/// Solves A^T P + P A = -Q for P (A Hurwitz). Throws std::invalid_argument otherwise.
MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q);

/// Numerical rank with relative singular-value threshold.
int numerical_rank(const MatrixXd& m, double rel_tol = 1e-12);

}  // namespace drcs
