#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drcs/dynamics.hpp"

namespace drcs {

/// Parametric matched drift terms h(x) in R^m.
struct DriftTerm {
  enum class Kind { kConstant, kLinearSaturated, kSinusoidal };
  Kind kind = Kind::kConstant;
  VectorXd h0;           // constant: value
  MatrixXd gain;         // linear_saturated: K (m x n); sinusoidal: rows are frequency vectors w_i
  double saturation = 0; // linear_saturated: elementwise clamp level s
  VectorXd amplitude;    // sinusoidal: a_i
  VectorXd phase;        // sinusoidal: phi_i
};

/// Parametric matched diffusion terms H(x) in R^{m x n_w}.
struct DiffusionTerm {
  enum class Kind { kConstant, kStateNorm };
  Kind kind = Kind::kConstant;
  MatrixXd e;          // shape matrix (m x n_w)
  double scale = 1.0;  // state_norm: sigma_h in sigma_h (1 + |x|^2)^{1/4} E
};

/// Sum of registered terms; empty lists mean no uncertainty in that channel.
struct UncertaintySpec {
  std::vector<DriftTerm> drift;
  std::vector<DiffusionTerm> diffusion;

  /// Throws std::invalid_argument on shape errors against (n, m, n_w).
  void validate(int n, int m, int n_w) const;
};

/// Closed-form Lipschitz and growth constants; terms add.
UncertaintyBounds closed_form_bounds(const UncertaintySpec& spec);

UncertaintyFunctions make_functions(const UncertaintySpec& spec, int m, int n_w);

struct BoundSpotCheck {
  bool ok = true;
  // Largest observed ratio of each quantity to its bound (<= 1 when the bound holds).
  double growth_mu = 0.0, growth_sigma = 0.0, lipschitz_mu = 0.0, lipschitz_sigma = 0.0;
  std::string message;
};

/// Samples states at several radii and checks every growth and Lipschitz inequality.
BoundSpotCheck spot_check_bounds(const UncertaintyFunctions& fns, const UncertaintyBounds& bounds, int n,
                                 int samples, std::uint64_t seed);

}  // namespace drcs
