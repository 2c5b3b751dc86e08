#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drcs/dynamics.hpp"

namespace drcs {

struct ControlParams {
  double omega = 0.0;     // filter bandwidth
  double t_s = 0.0;       // adaptation sampling period
  double lambda_s = 0.0;  // predictor gain
  void validate() const;
};

/// A_mu' P + P A_mu = -Q with alpha1 |x|^2 <= x'Px <= alpha2 |x|^2.
struct LyapunovCert {
  MatrixXd p;
  MatrixXd q;
  double alpha1 = 0.0;
  double alpha2 = 0.0;

  /// Solves for P given Hurwitz A_mu and Q > 0; alpha1/alpha2 are the extreme eigenvalues of P.
  static LyapunovCert from_q(const MatrixXd& a_mu, const MatrixXd& q);
};

struct RhoCertificateInputs {
  int p_order = 1;
  double delta_star = 0.0;
  double init_gap = 0.0;
  double delta_a_sigma = 0.0;
  double rho_a = 0.0;
  double epsilon = 0.0;
  double zeta1_coeff = 1.0;
  double zeta2_coeff = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  /// Optional additive term for discretization strong error; zero by default.
  double rho_inflation = 0.0;
  void validate() const;
};

struct ConditionCheck {
  bool ok = false;
  double slack1 = 0.0;  // beta1 - zeta1_coeff / sqrt(omega)
  double slack2 = 0.0;  // beta2 - zeta2_coeff * sqrt(t_s)
  std::string message;
};

ConditionCheck verify_parameter_conditions(const ControlParams& params, const RhoCertificateInputs& in);

struct RhoBreakdown {
  double rho_r = 0.0;
  double rho = 0.0;
};

/// Throws std::invalid_argument when the parameter conditions fail.
RhoBreakdown compute_rho(const RhoCertificateInputs& in, const LyapunovCert& cert, const ControlParams& params);

/// [I_m 0] [B, B_perp]^{-1} with B_perp an orthonormal basis of range(B)^perp.
MatrixXd build_theta_ad(const MatrixXd& b);

/// lambda_s / (1 - exp(lambda_s T_s)); negative for positive parameters.
double adaptation_gain(const ControlParams& params);

/// Estimate held on [i T_s, (i+1) T_s) for i >= 1.
VectorXd adaptation_update(const VectorXd& x_tilde, const ControlParams& params, const MatrixXd& theta_ad);

/// Exact zero-order-hold step of u' = -omega (u + lambda_hat).
VectorXd filter_step(const VectorXd& u, const VectorXd& lambda_hat, double omega, double dt);

/// Euler step of the predictor
///   x_hat' = -lambda_s (x_hat - x) + A_mu x + B (u_star + u_l1 + lambda_hat).
VectorXd predictor_step(const VectorXd& x_hat, const VectorXd& x, const SystemModel& model, const VectorXd& u_star,
                        const VectorXd& u_l1, const VectorXd& lambda_hat, double lambda_s, double dt);

/// Adaptive augmentation advanced on a fixed substep h that divides T_s.
class L1Drac {
 public:
  L1Drac(const SystemModel& model, const ControlParams& params, double substep, const VectorXd& x0);

  /// Input correction u_L1 to apply over the coming substep.
  const VectorXd& u_l1() const { return u_l1_; }
  const VectorXd& lambda_hat() const { return lambda_hat_; }
  const VectorXd& x_hat() const { return x_hat_; }

  /// Refreshes the adaptive estimate if the current substep starts at a sample instant.
  /// Idempotent within a substep; advance calls it as well.
  void observe(const VectorXd& x);

  /// Advances filter, adaptation and predictor by one substep given the plant state x at the
  /// start of the substep and the baseline input u_star applied over it.
  void advance(const VectorXd& x, const VectorXd& u_star);

 private:
  const SystemModel& model_;
  ControlParams params_;
  double h_;
  int per_sample_;
  long step_ = 0;
  long observed_ = -1;
  MatrixXd theta_ad_;
  VectorXd u_l1_, lambda_hat_, x_hat_;
};

/// One simulated trajectory of the adaptive loop, recorded every substep.
struct L1Path {
  std::vector<double> t;
  std::vector<VectorXd> x, x_hat, lambda_hat, u_l1, u;
};

/// Simulates dX = [A_mu X + B(U + H_mu(X))] dt + [A_sigma + B H_sigma(X)] dW with
/// U = u_star(k) + u_L1, u_star piecewise constant on the steps of length delta_t.
L1Path run_l1drac_loop(const SystemModel& model, const UncertaintyFunctions& unc,
                       const std::vector<VectorXd>& u_star, double delta_t, const ControlParams& params,
                       const VectorXd& x0, double substep, std::uint64_t seed, bool with_l1 = true);

}  // namespace drcs
