#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drcs/dynamics.hpp"
#include "drcs/l1drac.hpp"
#include "drcs/planner.hpp"
#include "drcs/safety.hpp"

namespace drcs {

/// States of N paths on the planning grid, stored path-major: [path][step][n].
struct PathEnsemble {
  int n_paths = 0, k_prime = 0, n = 0;
  double delta_t = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::vector<double> data;

  Eigen::Map<const VectorXd> state(int path, int step) const {
    return {data.data() + (static_cast<std::size_t>(path) * (k_prime + 1) + step) * n, n};
  }
  /// n x N matrix of the states at `step`.
  MatrixXd at_step(int step) const;
};

struct SimulationOptions {
  int n_paths = 1000;
  std::uint64_t seed = 1;
  /// Euler-Maruyama substeps per planning step; 1 reproduces the planner's discretization.
  int substeps = 1;
  /// Realize the planned disturbance feedback on each path's own noise; false keeps only the feedforward.
  bool feedback = true;
  /// Worker threads; results do not depend on this.
  int threads = 1;
};

/// x0 ~ N(mu0, Sigma0), nominal Euler-Maruyama with the planned schedule.
PathEnsemble simulate_nominal(const SystemModel& model, const Schedule& schedule, const BoundaryConditions& boundary,
                              const SimulationOptions& opts);

/// True dynamics with uncertainties; u = u* + u_L1, or u* alone when `l1` is empty.
/// With L1 enabled the substep must divide T_s.
PathEnsemble simulate_true(const SystemModel& model, const UncertaintyFunctions& unc, const Schedule& schedule,
                           const std::optional<ControlParams>& l1, const BoundaryConditions& boundary,
                           const SimulationOptions& opts);

struct EmpiricalMoments {
  VectorXd mean;
  MatrixXd cov;  // unbiased
};
EmpiricalMoments empirical_moments(const PathEnsemble& e, int step);

struct RateInterval {
  double rate = 0.0, lower = 0.0, upper = 0.0;
  long hits = 0, n = 0;
};
/// Wilson score interval at 95%.
RateInterval wilson_interval(long hits, long n);

/// Per-step fraction of paths outside the safe set with Wilson intervals.
std::vector<RateInterval> violation_rate(const PathEnsemble& e, const SafeSet& set);

/// Safe-set loss min_j max_l (c_l'x - d_l); nonpositive iff x is in the safe set.
double safe_set_loss(const SafeSet& set, const VectorXd& x);

struct TailMean {
  double value = 0.0, standard_error = 0.0;
};
/// Mean of the ceil(tail N) largest samples and the standard error of that mean.
TailMean tail_mean(std::vector<double> samples, double tail_mass);

/// Deterministic subsample of `count` path indices (partial Fisher-Yates on the subsample stream).
std::vector<int> subsample_paths(int n_paths, int count, std::uint64_t seed);

struct W2Estimate {
  double value = 0.0;           // mean over replicates
  double standard_error = 0.0;  // over replicates; zero with one replicate
  std::vector<double> replicates;
};
/// Empirical W2 between the two ensembles at `step` on `replicates` disjoint subsamples of `points` paths each.
W2Estimate ensemble_w2(const PathEnsemble& a, const PathEnsemble& b, int step, int points, int replicates,
                       std::uint64_t seed);

struct FaceCvar {
  int region = 0, face = 0;
  double tail_mass = 0.0;
  TailMean cvar;  // of c'x - d
};

struct StepReport {
  int step = 0;
  double t = 0.0;
  EmpiricalMoments nominal, truth;
  VectorXd planned_mean;
  MatrixXd planned_cov;
  W2Estimate w2_true_nominal;
  double w2_true_planned = 0.0;  // closed form on the true ensemble's empirical moments
  RateInterval violation;
  TailMean loss_cvar;            // of safe_set_loss at tail mass delta_s
  std::vector<FaceCvar> faces;   // faces of the region assigned at this step
};

struct SimulationReport {
  int n_paths = 0;
  std::uint64_t seed = 0;
  bool l1_enabled = true;
  bool feedback = true;
  double delta_s = 0.0, rho = 0.0;
  int w2_points = 0, w2_replicates = 0;
  std::vector<StepReport> steps;

  double max_w2() const;
  int argmax_w2() const;
};

struct ReportInputs {
  const PlannerSolution* solution = nullptr;
  const SafeSet* safe_set = nullptr;
  double delta_s = 0.05, rho = 0.0;
  int w2_points = 2000, w2_replicates = 4;
  bool l1_enabled = true, feedback = true;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Statistics of a true ensemble against a nominal one run with the same substep.
SimulationReport build_report(const PathEnsemble& nominal, const PathEnsemble& truth, const ReportInputs& in);

struct SafetyVerdict {
  bool ok = false;
  int first_failing_step = -1;
  std::string reason;
};
/// Every step's Wilson upper bound <= delta_s, and the empirical CVaR of the safe-set loss
/// <= 2 standard errors of the tail mean.
SafetyVerdict verify_safety(const SimulationReport& report, double delta_s);

}  // namespace drcs
