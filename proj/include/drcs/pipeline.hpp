#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drcs/report_io.hpp"

namespace drcs {

/// Plans the scenario; `gap_tol` overrides the scenario's branch-and-bound gap.
PlannerSolution plan_scenario(const Scenario& sc, std::optional<double> gap_tol = std::nullopt);

struct RunOptions {
  int paths = 0;
  std::uint64_t seed = 0;
  bool l1 = true;
  bool feedback = true;
  int threads = 1;
  int fan_paths = 40;
};
/// Monte Carlo settings from the scenario.
RunOptions default_run_options(const Scenario& sc);

struct SimulationRun {
  PathEnsemble grid_nominal;  // planner's grid, for the steering check
  PathEnsemble nominal;       // same substep as the true system, for W2
  PathEnsemble truth;
  RunReport report;
  double simulate_seconds = 0.0, statistics_seconds = 0.0;
};

/// Throws ParseError when the solution was planned for a different scenario or is not optimal.
void check_compatible(const Scenario& sc, const LoadedSolution& sol);

/// Runs the nominal and true ensembles and computes the report. Throws std::invalid_argument for N < 1.
SimulationRun run_simulation(const Scenario& sc, const PlannerSolution& sol, const std::string& solution_hash,
                             const RunOptions& opts);

struct SteeringCheck {
  bool ok = false;
  double mean_error = 0.0, standard_error = 0.0;  // |mean - mu_T| and sqrt(tr(cov) / N)
  double max_excess_eigenvalue = 0.0;             // of cov - sigma_T - 0.05 I
};
SteeringCheck check_steering(const SteeringSample& s, const VectorXd& mu_t, const MatrixXd& sigma_t);

struct Predicate {
  std::string name;
  bool pass = false;
  std::string detail;
};
/// Violation bound, tail CVaR, W2 <= rho and boundary moments, all recomputed from the report.
std::vector<Predicate> evaluate_report(const RunReport& r);

}  // namespace drcs
