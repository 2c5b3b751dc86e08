#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "drcs/l1drac.hpp"
#include "drcs/planner.hpp"
#include "drcs/uncertainty.hpp"

namespace drcs {

inline constexpr const char* kScenarioSchema = "drcs-scenario/1";

struct MonteCarloSettings {
  int paths = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
  int w2_points = 2000;
  int w2_replicates = 4;
};

struct Scenario {
  std::string name;
  SystemModel model;  // A_mu already closed with the pre-stabilizing gain, if one was given
  UncertaintySpec uncertainty;
  SafeSet safe_set;
  BoundaryConditions boundary;
  double horizon = 0.0, delta_t = 0.0;
  int k_prime = 0;
  double delta_s = 0.05;
  MatrixXd q, r, q_terminal;

  std::optional<ControlParams> l1;
  int substeps = 1;  // Euler-Maruyama substeps per planning step in validation runs

  std::optional<RhoCertificateInputs> certificate;
  MatrixXd lyapunov_q;               // Q in A_mu' P + P A_mu = -Q; identity when absent
  std::optional<double> rho_override;

  double big_m = 0.0;
  conic::BranchAndBoundOptions bnb;
  MonteCarloSettings monte_carlo;
  std::array<int, 2> projection{0, 1};

  std::string hash;  // SHA-256 of the canonical document

  /// Override if present, otherwise the certified radius. Throws std::invalid_argument if neither exists
  /// or the certificate conditions fail.
  double rho() const;
  /// Certified radius, when certificate inputs and L1 parameters are present.
  std::optional<RhoBreakdown> certified_rho() const;

  PlannerProblem planner_problem() const;
};

/// Parses and validates a scenario document. `source` prefixes error messages.
/// Throws ParseError naming the line (syntax) or the field path (content).
Scenario parse_scenario(const std::string& text, const std::string& source = "scenario");
Scenario load_scenario(const std::string& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

}  // namespace drcs
