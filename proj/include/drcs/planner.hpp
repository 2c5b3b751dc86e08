#pragma once

#include <string>
#include <vector>

#include "drcs/conic.hpp"
#include "drcs/dynamics.hpp"
#include "drcs/safety.hpp"

namespace drcs {

struct BoundaryConditions {
  VectorXd mu0, mu_t;
  MatrixXd sigma0, sigma_t;
  void validate(int n) const;
};

/// Standardized noise the feedback acts on:
///   x0 = mu0 + e0 xi0,   dW_k restricted to the nonzero columns of A_sigma = sqrt(dt) w_k,
/// with xi0 and w_k independent standard normal vectors.
struct NoiseChannels {
  MatrixXd e0;                // n x r0, e0 e0' = sigma0
  std::vector<int> w_cols;    // columns of A_sigma that are not identically zero
  int r0() const { return static_cast<int>(e0.cols()); }
  int n_wj() const { return static_cast<int>(w_cols.size()); }
  /// Number of standardized inputs known before step k: xi0 and w_0 .. w_{k-1}.
  int width(int k) const { return r0() + n_wj() * k; }

  static NoiseChannels build(const DiscreteModel& dm, const MatrixXd& sigma0);
};

struct PlannerProblem {
  DiscreteModel dm;
  MatrixXd q;           // per-step state weight (n x n), applied to x_1 .. x_{k'-1}
  MatrixXd q_terminal;  // weight on x_{k'}; empty means q
  MatrixXd r;           // per-step input weight (m x m)
  BoundaryConditions boundary;
  SafeSet safe_set;
  double delta_s = 0.05;
  double rho = 0.0;
  /// Fixed Big-M constant; zero derives one per face from a safety-free reference plan.
  double big_m = 0.0;
  bool enforce_safety = true;
  conic::BranchAndBoundOptions bnb;

  void validate() const;
};

/// u_k = v_k + K_k [xi0; w_0; ...; w_{k-1}]
struct PlannerDecision {
  std::vector<VectorXd> v;      // k' entries, m each
  std::vector<MatrixXd> k;      // k' entries, m x width(k)
  std::vector<int> region;      // k' entries: region assigned to segment [k, k+1]
};

struct Moments {
  std::vector<VectorXd> mean;   // k' + 1 entries
  std::vector<MatrixXd> cov;
};

/// Moments of the nominal closed loop from the stacked (lifted) form.
Moments propagate_moments(const LiftedModel& lifted, const NoiseChannels& channels, const PlannerDecision& decision,
                          const BoundaryConditions& boundary, double delta_t);

/// E[sum_{e=1}^{k'} x_e' Q_e x_e + sum_k u_k' R u_k] evaluated from moments and gains.
double expected_cost(const PlannerProblem& problem, const Moments& moments, const PlannerDecision& decision);

struct FaceMargin {
  int region = 0, face = 0, column = 0, endpoint = 0;
  double value = 0.0;  // DR-CVaR; <= 0 certifies the face
};

/// Variable positions inside an assembled program.
struct PlannerLayout {
  std::vector<std::vector<int>> v;    // [k][a]
  std::vector<std::vector<int>> k;    // [k][a * width(k) + c]
  std::vector<std::vector<int>> o;    // [j][k]
  int cost = -1;
  int safety_rows = 0;
};

struct Assembly {
  conic::ConeProgram program;
  PlannerLayout layout;
  NoiseChannels channels;
};

/// Builds the mixed-integer conic program. `big_m` holds one constant per (region, face);
/// an empty vector uses problem.big_m everywhere.
Assembly assemble(const PlannerProblem& problem, const std::vector<std::vector<double>>& big_m = {});

PlannerDecision extract_decision(const Assembly& assembly, const VectorXd& x, int m);

struct PlannerSolution {
  conic::Status status = conic::Status::kNumericalFailure;
  PlannerDecision decision;
  NoiseChannels channels;
  Moments moments;
  double objective = 0.0;         // recomputed expected cost
  double solver_objective = 0.0;  // squared epigraph variable
  std::vector<FaceMargin> margins;  // faces of the assigned region at both ends of every segment
  double max_margin = 0.0;
  std::vector<std::vector<double>> big_m;
  conic::SolveStats stats;
  std::string message;
  std::string diagnostic;  // for infeasible problems: the face that cannot be certified per region
};

PlannerSolution solve(const PlannerProblem& problem);

/// Zero-order-hold schedule with the feedback realization rule.
struct Schedule {
  double delta_t = 0.0;
  NoiseChannels channels;
  std::vector<VectorXd> v;
  std::vector<MatrixXd> k;

  int k_prime() const { return static_cast<int>(v.size()); }
  /// u_k for a realized xi0 and standardized increments w[0 .. k-1].
  VectorXd input(int step, const VectorXd& xi0, const std::vector<VectorXd>& w) const;
};

Schedule extract_schedule(const PlannerSolution& solution, const DiscreteModel& dm);

}  // namespace drcs
