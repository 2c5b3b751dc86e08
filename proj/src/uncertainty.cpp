#include "drcs/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "drcs/rng.hpp"

namespace drcs {
namespace {

// sup_r d/dr (1 + r^2)^{1/4} = sqrt(2) / (2 * 3^{3/4}), attained at r = sqrt(2).
const double kQuarterRootSlope = std::sqrt(2.0) / (2.0 * std::pow(3.0, 0.75));

VectorXd eval_drift(const DriftTerm& t, const VectorXd& x) {
  switch (t.kind) {
    case DriftTerm::Kind::kConstant: return t.h0;
    case DriftTerm::Kind::kLinearSaturated:
      return (t.gain * x).cwiseMax(-t.saturation).cwiseMin(t.saturation);
    case DriftTerm::Kind::kSinusoidal: {
      const VectorXd arg = t.gain * x + t.phase;
      return t.amplitude.cwiseProduct(arg.array().sin().matrix());
    }
  }
  return {};
}

MatrixXd eval_diffusion(const DiffusionTerm& t, const VectorXd& x) {
  if (t.kind == DiffusionTerm::Kind::kConstant) return t.e;
  return t.scale * std::pow(1.0 + x.squaredNorm(), 0.25) * t.e;
}

}  // namespace

void UncertaintySpec::validate(int n, int m, int n_w) const {
  for (const auto& t : drift) {
    switch (t.kind) {
      case DriftTerm::Kind::kConstant:
        if (t.h0.size() != m || !t.h0.allFinite()) throw std::invalid_argument("constant drift must be a finite m-vector");
        break;
      case DriftTerm::Kind::kLinearSaturated:
        if (t.gain.rows() != m || t.gain.cols() != n) throw std::invalid_argument("linear_saturated gain must be m x n");
        if (!(t.saturation > 0.0) || !std::isfinite(t.saturation))
          throw std::invalid_argument("linear_saturated level must be positive");
        break;
      case DriftTerm::Kind::kSinusoidal:
        if (t.gain.rows() != m || t.gain.cols() != n || t.amplitude.size() != m || t.phase.size() != m)
          throw std::invalid_argument("sinusoidal drift needs m amplitudes, m phases and an m x n frequency matrix");
        break;
    }
  }
  for (const auto& t : diffusion) {
    if (t.e.rows() != m || t.e.cols() != n_w) throw std::invalid_argument("diffusion shape matrix must be m x n_w");
    if (!t.e.allFinite() || !(t.scale >= 0.0)) throw std::invalid_argument("diffusion parameters must be finite");
  }
}

UncertaintyBounds closed_form_bounds(const UncertaintySpec& spec) {
  UncertaintyBounds b;
  for (const auto& t : spec.drift) {
    switch (t.kind) {
      case DriftTerm::Kind::kConstant:
        b.delta_mu += t.h0.norm();
        break;
      case DriftTerm::Kind::kLinearSaturated: {
        Eigen::JacobiSVD<MatrixXd> svd(t.gain);
        b.l_mu += svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
        b.delta_mu += std::sqrt(static_cast<double>(t.gain.rows())) * t.saturation;
        break;
      }
      case DriftTerm::Kind::kSinusoidal: {
        double s = 0.0;
        for (int i = 0; i < t.amplitude.size(); ++i) s += t.amplitude[i] * t.amplitude[i] * t.gain.row(i).squaredNorm();
        b.l_mu += std::sqrt(s);
        b.delta_mu += t.amplitude.norm();
        break;
      }
    }
  }
  for (const auto& t : spec.diffusion) {
    if (t.kind == DiffusionTerm::Kind::kConstant) {
      b.delta_sigma += t.e.norm();
    } else {
      b.delta_sigma += t.scale * t.e.norm();
      b.l_sigma += t.scale * t.e.norm() * kQuarterRootSlope;
    }
  }
  return b;
}

UncertaintyFunctions make_functions(const UncertaintySpec& spec, int m, int n_w) {
  UncertaintyFunctions f;
  f.h_mu = [drift = spec.drift, m](const VectorXd& x) {
    VectorXd out = VectorXd::Zero(m);
    for (const auto& t : drift) out += eval_drift(t, x);
    return out;
  };
  f.h_sigma = [diffusion = spec.diffusion, m, n_w](const VectorXd& x) {
    MatrixXd out = MatrixXd::Zero(m, n_w);
    for (const auto& t : diffusion) out += eval_diffusion(t, x);
    return out;
  };
  return f;
}

BoundSpotCheck spot_check_bounds(const UncertaintyFunctions& fns, const UncertaintyBounds& bounds, int n,
                                 int samples, std::uint64_t seed) {
  BoundSpotCheck out;
  const NormalStream rng(seed, static_cast<std::uint32_t>(StreamId::kFixture), 0);
  std::vector<double> z(static_cast<std::size_t>(2 * n));
  constexpr double kRel = 1e-12;
  auto ratio = [](double lhs, double rhs) { return rhs > 0.0 ? lhs / rhs : (lhs > kRel ? INFINITY : 0.0); };
  for (int s = 0; s < samples; ++s) {
    rng.normals(static_cast<std::uint32_t>(s), z);
    // Radii spread over several decades so both the bounded and growing regimes are probed.
    const double radius = std::pow(10.0, -2.0 + 5.0 * rng.uniform(static_cast<std::uint32_t>(s), 0));
    VectorXd a = Eigen::Map<const VectorXd>(z.data(), n);
    a *= radius / std::max(a.norm(), 1e-300);
    VectorXd step = Eigen::Map<const VectorXd>(z.data() + n, n);
    step *= 0.2 * std::max(radius, 1.0) * rng.uniform(static_cast<std::uint32_t>(s), 1) / std::max(step.norm(), 1e-300);
    const VectorXd b = a + step;
    const double na2 = a.squaredNorm();
    const VectorXd ha = fns.h_mu(a), hb = fns.h_mu(b);
    const MatrixXd sa = fns.h_sigma(a), sb = fns.h_sigma(b);
    out.growth_mu = std::max(out.growth_mu, ratio(ha.squaredNorm(), bounds.delta_mu * bounds.delta_mu * (1 + na2)));
    out.growth_sigma = std::max(out.growth_sigma, ratio(sa.squaredNorm(), bounds.delta_sigma * bounds.delta_sigma *
                                                                               std::sqrt(1 + na2)));
    const double dx = (a - b).norm();
    out.lipschitz_mu = std::max(out.lipschitz_mu, ratio((ha - hb).norm(), bounds.l_mu * dx));
    out.lipschitz_sigma = std::max(out.lipschitz_sigma, ratio((sa - sb).norm(), bounds.l_sigma * dx));
  }
  const double tol = 1.0 + 1e-9;
  auto flag = [&](double v, const char* what) {
    if (v > tol) {
      out.ok = false;
      out.message += std::string(what) + " bound exceeded (ratio " + std::to_string(v) + "); ";
    }
  };
  flag(out.growth_mu, "drift growth");
  flag(out.growth_sigma, "diffusion growth");
  flag(out.lipschitz_mu, "drift Lipschitz");
  flag(out.lipschitz_sigma, "diffusion Lipschitz");
  return out;
}

}  // namespace drcs
