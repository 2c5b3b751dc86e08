#pragma once

#include <vector>

#include "drcs/linalg.hpp"

namespace drcs {

/// Closed-form 2-Wasserstein distance between N(mu1, sigma1) and N(mu2, sigma2).
/// Throws std::invalid_argument for covariances that are not PSD to 1e-8.
double gaussian_w2(const VectorXd& mu1, const MatrixXd& sigma1, const VectorXd& mu2, const MatrixXd& sigma2);

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
/// Jonker-Volgenant (O(n^3) worst case). Returns the column matched to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

/// Exact W2 between two uniform empirical measures with the same number of points (columns).
double empirical_w2(const MatrixXd& a, const MatrixXd& b);

/// Largest N accepted by empirical_w2.
inline constexpr int kMaxExactW2Points = 4096;

}  // namespace drcs
