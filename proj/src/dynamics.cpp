#include "drcs/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcs {

void SystemModel::validate() const {
  const auto n_ = a_mu.rows();
  if (n_ == 0 || a_mu.cols() != n_) throw std::invalid_argument("a_mu must be square and nonempty");
  if (b.rows() != n_ || b.cols() == 0) throw std::invalid_argument("b must be n x m with m >= 1");
  if (a_sigma.rows() != n_ || a_sigma.cols() == 0)
    throw std::invalid_argument("a_sigma must be n x n_w with n_w >= 1");
  if (!a_mu.allFinite() || !b.allFinite() || !a_sigma.allFinite())
    throw std::invalid_argument("system matrices must be finite");
  if (numerical_rank(b) != b.cols()) throw std::invalid_argument("b must have full column rank");
}

void UncertaintyBounds::validate() const {
  for (double v : {l_mu, l_sigma, delta_mu, delta_sigma})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("uncertainty bounds must be finite and nonnegative");
}

UncertaintyFunctions UncertaintyFunctions::none(int m, int n_w) {
  return {[m](const VectorXd&) { return VectorXd::Zero(m); },
          [m, n_w](const VectorXd&) { return MatrixXd::Zero(m, n_w); }};
}

DiscreteModel discretize(const SystemModel& model, double delta_t, int k_prime) {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t))
    throw std::invalid_argument("discretize: delta_t must be positive, got " + std::to_string(delta_t));
  if (k_prime < 1) throw std::invalid_argument("discretize: horizon k' must be >= 1");
  model.validate();
  DiscreteModel dm;
  dm.delta_t = delta_t;
  dm.k_prime = k_prime;
  dm.transition = MatrixXd::Identity(model.n(), model.n()) + delta_t * model.a_mu;
  dm.input = delta_t * model.b;
  dm.noise = model.a_sigma;
  return dm;
}

LiftedModel build_lifted(const DiscreteModel& dm) {
  const int n = dm.n(), m = dm.m(), nw = dm.n_w(), kp = dm.k_prime;
  LiftedModel lm;
  lm.n = n;
  lm.m = m;
  lm.n_w = nw;
  lm.k_prime = kp;
  lm.cal_a_mu = MatrixXd::Zero(n * kp, n);
  lm.b_hat = MatrixXd::Zero(n * kp, m * kp);
  lm.cal_a_sigma = MatrixXd::Zero(n * kp, nw * kp);

  // powers[p] = transition^p
  std::vector<MatrixXd> powers(kp + 1);
  powers[0] = MatrixXd::Identity(n, n);
  for (int p = 1; p <= kp; ++p) powers[p] = dm.transition * powers[p - 1];

  for (int r = 0; r < kp; ++r) {
    lm.cal_a_mu.block(r * n, 0, n, n) = powers[r + 1];
    for (int j = 0; j <= r; ++j) {
      lm.b_hat.block(r * n, j * m, n, m) = powers[r - j] * dm.input;
      lm.cal_a_sigma.block(r * n, j * nw, n, nw) = powers[r - j] * dm.noise;
    }
  }
  return lm;
}

VectorXd rollout(const DiscreteModel& dm, const VectorXd& x0, const VectorXd& u_stack,
                 const VectorXd& w_stack) {
  const int n = dm.n(), m = dm.m(), nw = dm.n_w(), kp = dm.k_prime;
  if (x0.size() != n || u_stack.size() != m * kp || w_stack.size() != nw * kp)
    throw std::invalid_argument("rollout: dimension mismatch");
  VectorXd out(n * kp);
  VectorXd x = x0;
  for (int k = 0; k < kp; ++k) {
    x = dm.step(x, u_stack.segment(k * m, m), w_stack.segment(k * nw, nw));
    out.segment(k * n, n) = x;
  }
  return out;
}

}  // namespace drcs
