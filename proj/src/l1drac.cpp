#include "drcs/l1drac.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

#include "drcs/rng.hpp"

namespace drcs {
namespace {

int divides(double whole, double part) {
  const double r = whole / part;
  const double k = std::round(r);
  if (k < 1.0 || std::abs(r - k) > 1e-9 * k) return 0;
  return static_cast<int>(k);
}

}  // namespace

void ControlParams::validate() const {
  if (!(omega > 0.0) || !(t_s > 0.0) || !(lambda_s > 0.0))
    throw std::invalid_argument("omega, t_s and lambda_s must be positive");
}

void RhoCertificateInputs::validate() const {
  if (p_order < 1) throw std::invalid_argument("p_order must be >= 1");
  for (double v : {delta_star, init_gap, delta_a_sigma, rho_a, epsilon, zeta1_coeff, zeta2_coeff, beta1, beta2,
                   rho_inflation})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("certificate inputs must be finite and >= 0");
}

LyapunovCert LyapunovCert::from_q(const MatrixXd& a_mu, const MatrixXd& q) {
  LyapunovCert c;
  c.q = q;
  c.p = solve_lyapunov(a_mu, q);
  c.alpha1 = min_eigenvalue(c.p);
  c.alpha2 = max_eigenvalue(c.p);
  if (!(c.alpha1 > 0.0)) throw std::invalid_argument("Lyapunov solution is not positive definite");
  return c;
}

ConditionCheck verify_parameter_conditions(const ControlParams& params, const RhoCertificateInputs& in) {
  ConditionCheck out;
  if (!(params.omega > 0.0) || !(params.t_s > 0.0)) {
    out.message = "omega and t_s must be positive";
    return out;
  }
  out.slack1 = in.beta1 - in.zeta1_coeff / std::sqrt(params.omega);
  out.slack2 = in.beta2 - in.zeta2_coeff * std::sqrt(params.t_s);
  out.ok = out.slack1 > 0.0 && out.slack2 > 0.0;
  if (!(out.slack1 > 0.0)) out.message += "beta1 <= zeta1/sqrt(omega) (increase omega); ";
  if (!(out.slack2 > 0.0)) out.message += "beta2 <= zeta2*sqrt(t_s) (decrease t_s); ";
  return out;
}

RhoBreakdown compute_rho(const RhoCertificateInputs& in, const LyapunovCert& cert, const ControlParams& params) {
  in.validate();
  const auto chk = verify_parameter_conditions(params, in);
  if (!chk.ok) throw std::invalid_argument("parameter conditions violated: " + chk.message);
  if (!(cert.alpha1 > 0.0) || cert.alpha2 < cert.alpha1)
    throw std::invalid_argument("Lyapunov constants must satisfy 0 < alpha1 <= alpha2");
  RhoBreakdown r;
  r.rho_r = std::sqrt(cert.alpha2 / cert.alpha1) * in.init_gap + in.delta_a_sigma + in.epsilon;
  r.rho = r.rho_r + in.rho_a + in.delta_a_sigma + in.rho_inflation;
  return r;
}

MatrixXd build_theta_ad(const MatrixXd& b) {
  const int n = static_cast<int>(b.rows()), m = static_cast<int>(b.cols());
  if (m < 1 || m > n || numerical_rank(b) != m) throw std::invalid_argument("B must have full column rank");
  Eigen::HouseholderQR<MatrixXd> qr(b);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
  MatrixXd bbar(n, n);
  bbar << b, q.rightCols(n - m);
  return bbar.inverse().topRows(m);
}

double adaptation_gain(const ControlParams& params) {
  return params.lambda_s / (1.0 - std::exp(params.lambda_s * params.t_s));
}

VectorXd adaptation_update(const VectorXd& x_tilde, const ControlParams& params, const MatrixXd& theta_ad) {
  return adaptation_gain(params) * (theta_ad * x_tilde);
}

VectorXd filter_step(const VectorXd& u, const VectorXd& lambda_hat, double omega, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("filter_step: dt must be positive");
  const double e = std::exp(-omega * dt);
  return e * u + (e - 1.0) * lambda_hat;
}

VectorXd predictor_step(const VectorXd& x_hat, const VectorXd& x, const SystemModel& model, const VectorXd& u_star,
                        const VectorXd& u_l1, const VectorXd& lambda_hat, double lambda_s, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predictor_step: dt must be positive");
  const VectorXd drift = -lambda_s * (x_hat - x) + model.a_mu * x + model.b * (u_star + u_l1 + lambda_hat);
  return x_hat + dt * drift;
}

L1Drac::L1Drac(const SystemModel& model, const ControlParams& params, double substep, const VectorXd& x0)
    : model_(model), params_(params), h_(substep) {
  params_.validate();
  if (!(substep > 0.0)) throw std::invalid_argument("substep must be positive");
  per_sample_ = divides(params.t_s, substep);
  if (per_sample_ == 0) throw std::invalid_argument("simulation substep must divide T_s");
  theta_ad_ = build_theta_ad(model.b);
  u_l1_ = VectorXd::Zero(model.m());
  lambda_hat_ = VectorXd::Zero(model.m());
  x_hat_ = x0;
}

void L1Drac::observe(const VectorXd& x) {
  if (observed_ == step_) return;
  observed_ = step_;
  // Sample instants i T_s with i >= 1 refresh the estimate; [0, T_s) keeps it at zero.
  if (step_ > 0 && step_ % per_sample_ == 0) lambda_hat_ = adaptation_update(x_hat_ - x, params_, theta_ad_);
}

void L1Drac::advance(const VectorXd& x, const VectorXd& u_star) {
  observe(x);
  const VectorXd x_hat_next = predictor_step(x_hat_, x, model_, u_star, u_l1_, lambda_hat_, params_.lambda_s, h_);
  u_l1_ = filter_step(u_l1_, lambda_hat_, params_.omega, h_);
  x_hat_ = x_hat_next;
  ++step_;
}

L1Path run_l1drac_loop(const SystemModel& model, const UncertaintyFunctions& unc,
                       const std::vector<VectorXd>& u_star, double delta_t, const ControlParams& params,
                       const VectorXd& x0, double substep, std::uint64_t seed, bool with_l1) {
  const int per_step = divides(delta_t, substep);
  if (per_step == 0) throw std::invalid_argument("simulation substep must divide the planning step");
  const int m = model.m(), nw = model.n_w();
  L1Path path;
  VectorXd x = x0;
  L1Drac l1(model, params, substep, x0);
  NormalStream rng(seed, static_cast<std::uint32_t>(StreamId::kTrue), 0);
  std::vector<double> z(static_cast<std::size_t>(nw));
  const double sq = std::sqrt(substep);
  auto record = [&](double t, const VectorXd& u) {
    path.t.push_back(t);
    path.x.push_back(x);
    path.x_hat.push_back(l1.x_hat());
    path.lambda_hat.push_back(l1.lambda_hat());
    path.u_l1.push_back(l1.u_l1());
    path.u.push_back(u);
  };
  long s = 0;
  for (std::size_t k = 0; k < u_star.size(); ++k) {
    for (int j = 0; j < per_step; ++j, ++s) {
      if (with_l1) l1.observe(x);
      const VectorXd u_l1 = with_l1 ? l1.u_l1() : VectorXd::Zero(m);
      const VectorXd u = u_star[k] + u_l1;
      record(static_cast<double>(s) * substep, u);
      rng.normals(static_cast<std::uint32_t>(s), z);
      const VectorXd dw = sq * Eigen::Map<const VectorXd>(z.data(), nw);
      const VectorXd drift = model.a_mu * x + model.b * (u + unc.h_mu(x));
      const MatrixXd diff = model.a_sigma + model.b * unc.h_sigma(x);
      if (with_l1) l1.advance(x, u_star[k]);
      x = x + substep * drift + diff * dw;
    }
  }
  record(static_cast<double>(s) * substep, VectorXd::Zero(m));
  return path;
}

}  // namespace drcs
