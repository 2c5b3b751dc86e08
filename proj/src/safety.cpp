#include "drcs/safety.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "drcs/conic.hpp"

namespace drcs {
namespace {

void check_dim(const ConvexRegion& region, const VectorXd& z) {
  for (const auto& f : region.faces)
    if (f.c.size() != z.size()) throw std::invalid_argument("half-space dimension does not match point");
}

}  // namespace

bool contains(const ConvexRegion& region, const VectorXd& z) {
  check_dim(region, z);
  for (const auto& f : region.faces)
    if (f.c.dot(z) > f.d) return false;
  return true;
}

bool contains(const SafeSet& set, const VectorXd& z) {
  for (const auto& r : set.regions)
    if (contains(r, z)) return true;
  return false;
}

double region_margin(const ConvexRegion& region, const VectorXd& z) {
  check_dim(region, z);
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : region.faces) m = std::min(m, (f.d - f.c.dot(z)) / f.c.norm());
  return m;
}

double min_signed_margin(const SafeSet& set, const VectorXd& z) {
  if (set.regions.empty()) throw std::invalid_argument("safe set has no regions");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& r : set.regions) m = std::max(m, region_margin(r, z));
  return m;
}

double allocate_risk(double delta_s, int n_l) {
  if (!(delta_s > 0.0 && delta_s < 1.0)) throw std::invalid_argument("delta_s must lie in (0, 1)");
  if (n_l < 1) throw std::invalid_argument("a region needs at least one face");
  return delta_s / n_l;
}

std::vector<double> face_risks(const ConvexRegion& region, double delta_s) {
  const int nl = static_cast<int>(region.faces.size());
  const double uniform = allocate_risk(delta_s, nl);
  if (region.face_weights.empty()) return std::vector<double>(nl, uniform);
  std::vector<double> out;
  for (double w : region.face_weights) out.push_back(delta_s * w);
  return out;
}

double chebyshev_radius(const ConvexRegion& region, double cap) {
  // max t  s.t.  c'z + ||c|| t <= d,  t <= cap
  const int n = region.dim();
  conic::ProgramBuilder pb;
  std::vector<int> z(n);
  for (auto& v : z) v = pb.add_variable();
  const int t = pb.add_variable(-std::numeric_limits<double>::infinity(), cap);
  pb.set_objective(t, -1.0);
  for (const auto& f : region.faces) {
    conic::LinExpr e(f.d);
    for (int i = 0; i < n; ++i) e.add(z[i], -f.c[i]);
    e.add(t, -f.c.norm());
    pb.add_nonneg(e);
  }
  const auto r = conic::solve_relaxation(pb.build());
  if (r.status == conic::Status::kOptimal) return r.x[t];
  if (r.status == conic::Status::kInfeasible) return -std::numeric_limits<double>::infinity();
  throw std::runtime_error("region feasibility check failed: " + r.message);
}

void validate(const SafeSet& set) {
  if (set.regions.empty()) throw std::invalid_argument("safe set has no regions");
  const int n = set.dim();
  for (std::size_t j = 0; j < set.regions.size(); ++j) {
    const auto& r = set.regions[j];
    const std::string where = "region " + std::to_string(j);
    if (r.faces.empty()) throw std::invalid_argument(where + " has no faces");
    for (const auto& f : r.faces) {
      if (f.c.size() != n) throw std::invalid_argument(where + ": face dimension mismatch");
      if (!(f.c.norm() > 0.0) || !f.c.allFinite() || !std::isfinite(f.d))
        throw std::invalid_argument(where + ": face normal must be finite and nonzero");
    }
    if (!r.face_weights.empty()) {
      if (r.face_weights.size() != r.faces.size())
        throw std::invalid_argument(where + ": one weight per face required");
      double s = 0.0;
      for (double w : r.face_weights) {
        if (!(w > 0.0)) throw std::invalid_argument(where + ": face weights must be positive");
        s += w;
      }
      if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(where + ": face weights must sum to 1");
    }
    if (chebyshev_radius(r) <= 0.0) throw std::invalid_argument(where + " is empty");
  }
}

}  // namespace drcs
