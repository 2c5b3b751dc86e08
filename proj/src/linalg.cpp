#include "drcs/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace drcs {

MatrixXd sym_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool is_symmetric_psd(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  return min_eigenvalue(m) >= -tol * scale;
}

MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  Eigen::EigenSolver<MatrixXd> es(a, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0)
    throw std::invalid_argument("solve_lyapunov: drift matrix is not Hurwitz");
  // (I kron A^T + A^T kron I) vec(P) = -vec(Q)
  const MatrixXd eye = MatrixXd::Identity(n, n);
  MatrixXd big = MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      big.block(i * n, j * n, n, n) += eye(i, j) * a.transpose();
      big.block(i * n, j * n, n, n) += a(j, i) * eye;
    }
  const MatrixXd qs = 0.5 * (q + q.transpose());
  VectorXd rhs = -Eigen::Map<const VectorXd>(qs.data(), n * n);
  VectorXd p = big.fullPivLu().solve(rhs);
  MatrixXd pm = Eigen::Map<MatrixXd>(p.data(), n, n);
  return 0.5 * (pm + pm.transpose());
}

int numerical_rank(const MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

}  // namespace drcs
