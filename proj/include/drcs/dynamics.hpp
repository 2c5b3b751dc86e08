#pragma once

#include <functional>

#include "drcs/linalg.hpp"

namespace drcs {

/// Known part of dX = [A_mu X + B(U + H_mu(X))] dt + [A_sigma + B H_sigma(X)] dW.
struct SystemModel {
  MatrixXd a_mu;     // n x n
  MatrixXd a_sigma;  // n x n_w
  MatrixXd b;        // n x m

  int n() const { return static_cast<int>(a_mu.rows()); }
  int m() const { return static_cast<int>(b.cols()); }
  int n_w() const { return static_cast<int>(a_sigma.cols()); }

  /// Throws std::invalid_argument on inconsistent dimensions or rank-deficient B.
  void validate() const;
};

/// Lipschitz (l_*) and linear-growth (delta_*) constants of the uncertainties.
struct UncertaintyBounds {
  double l_mu = 0.0;
  double l_sigma = 0.0;
  double delta_mu = 0.0;
  double delta_sigma = 0.0;

  void validate() const;
};

/// Scenario-supplied uncertainties; only the simulator evaluates them.
struct UncertaintyFunctions {
  std::function<VectorXd(const VectorXd&)> h_mu;     // R^n -> R^m
  std::function<MatrixXd(const VectorXd&)> h_sigma;  // R^n -> R^{m x n_w}

  static UncertaintyFunctions none(int m, int n_w);
};

/// One Euler-Maruyama step of the nominal plant:
///   x+ = transition x + input u + noise dW,   dW ~ N(0, delta_t I).
struct DiscreteModel {
  double delta_t = 0.0;
  int k_prime = 0;
  MatrixXd transition;  // I + dt A_mu
  MatrixXd input;       // dt B
  MatrixXd noise;       // A_sigma

  int n() const { return static_cast<int>(transition.rows()); }
  int m() const { return static_cast<int>(input.cols()); }
  int n_w() const { return static_cast<int>(noise.cols()); }
  double horizon() const { return delta_t * k_prime; }

  VectorXd step(const VectorXd& x, const VectorXd& u, const VectorXd& dw) const {
    return transition * x + input * u + noise * dw;
  }
};

/// Stacked-horizon form X = cal_a_mu x0 + b_hat U + cal_a_sigma W.
///
/// Row block r (0-based) holds x_{r+1}; column block j holds u_j (resp. dW_j).
/// Block (r, j) is nonzero only for j <= r, i.e. block (i, j) with i = r+1 vanishes for j >= i.
struct LiftedModel {
  MatrixXd cal_a_mu;     // (n k') x n
  MatrixXd b_hat;        // (n k') x (m k')
  MatrixXd cal_a_sigma;  // (n k') x (n_w k')
  int n = 0, m = 0, n_w = 0, k_prime = 0;

  VectorXd apply(const VectorXd& x0, const VectorXd& u_stack, const VectorXd& w_stack) const {
    return cal_a_mu * x0 + b_hat * u_stack + cal_a_sigma * w_stack;
  }
};

DiscreteModel discretize(const SystemModel& model, double delta_t, int k_prime);

LiftedModel build_lifted(const DiscreteModel& dm);

/// Step-by-step recursion producing the same stacking as LiftedModel::apply.
VectorXd rollout(const DiscreteModel& dm, const VectorXd& x0, const VectorXd& u_stack,
                 const VectorXd& w_stack);

}  // namespace drcs
