#include "drcs/risk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace drcs {

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  // Acklam's rational approximation (relative error 1.15e-9), then refinement.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425, hi = 1.0 - lo;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= hi) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Newton step on Phi(x) - p, evaluated in the smaller tail.
  const double err = (p < 0.5) ? std_normal_cdf(x) - p : (1.0 - p) - std_normal_cdf(-x);
  const double u = err / std_normal_pdf(x);
  x -= u;
  return x;
}

double cvar_coefficient(double face_risk) {
  if (!(face_risk > 0.0 && face_risk < 1.0)) throw std::invalid_argument("face risk must lie in (0, 1)");
  return std_normal_pdf(std_normal_quantile(1.0 - face_risk)) / face_risk;
}

double gaussian_cvar_halfspace(const VectorXd& c, double d, const VectorXd& mu, const MatrixXd& sigma,
                               double face_risk) {
  if (c.size() != mu.size() || sigma.rows() != c.size() || sigma.cols() != c.size())
    throw std::invalid_argument("gaussian_cvar_halfspace: dimension mismatch");
  double var = c.dot(sigma * c);
  if (var < -1e-12) throw std::invalid_argument("covariance is not positive semidefinite");
  var = std::max(var, 0.0);
  return c.dot(mu) - d + cvar_coefficient(face_risk) * std::sqrt(var);
}

double dr_cvar_halfspace(const VectorXd& c, double d, const VectorXd& mu, const MatrixXd& sigma,
                         double face_risk, double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("ambiguity radius must be nonnegative");
  return gaussian_cvar_halfspace(c, d, mu, sigma, face_risk) + c.norm() * rho / std::sqrt(face_risk);
}

UnionBoundResult union_bound_feasible(const ConvexRegion& region, const VectorXd& mu, const MatrixXd& sigma,
                                      double delta_s, double rho) {
  UnionBoundResult out;
  const auto risks = face_risks(region, delta_s);
  out.feasible = true;
  for (std::size_t l = 0; l < region.faces.size(); ++l) {
    const auto& f = region.faces[l];
    const double m = dr_cvar_halfspace(f.c, f.d, mu, sigma, risks[l], rho);
    out.margins.push_back(m);
    if (m > 0.0) out.feasible = false;
  }
  return out;
}

double empirical_cvar(std::span<const double> samples, double tail_mass) {
  if (samples.empty()) throw std::invalid_argument("empirical_cvar: no samples");
  if (!(tail_mass > 0.0 && tail_mass <= 1.0)) throw std::invalid_argument("tail mass must lie in (0, 1]");
  const auto n = samples.size();
  auto k = static_cast<std::size_t>(std::ceil(tail_mass * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<double> v(samples.begin(), samples.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

}  // namespace drcs
