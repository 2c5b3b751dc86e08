#pragma once

#include <span>
#include <vector>

#include "drcs/linalg.hpp"
#include "drcs/safety.hpp"

namespace drcs {

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// Inverse CDF; throws std::invalid_argument unless 0 < p < 1.
double std_normal_quantile(double p);

/// phi(Phi^{-1}(1 - f)) / f: CVaR of a standard normal at tail mass f.
double cvar_coefficient(double face_risk);

/// c'mu - d + cvar_coefficient(f) sqrt(c' Sigma c). Nonpositive certifies the face.
double gaussian_cvar_halfspace(const VectorXd& c, double d, const VectorXd& mu, const MatrixXd& sigma,
                               double face_risk);

/// Worst case over the 2-Wasserstein ball of radius rho: adds ||c|| rho / sqrt(f).
double dr_cvar_halfspace(const VectorXd& c, double d, const VectorXd& mu, const MatrixXd& sigma,
                         double face_risk, double rho);

struct UnionBoundResult {
  bool feasible = false;
  std::vector<double> margins;  // dr_cvar_halfspace per face
};

UnionBoundResult union_bound_feasible(const ConvexRegion& region, const VectorXd& mu, const MatrixXd& sigma,
                                      double delta_s, double rho);

/// Mean of the ceil(tail_mass N) largest samples.
double empirical_cvar(std::span<const double> samples, double tail_mass);

}  // namespace drcs
