#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "drcs/planner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace drcs;
using namespace drcs::fixtures;
using namespace drcs::oracles;

namespace {

PlannerDecision random_decision(const NoiseChannels& ch, int m, int kp, std::mt19937& gen) {
  std::normal_distribution<double> nd;
  PlannerDecision d;
  for (int k = 0; k < kp; ++k) {
    d.v.push_back(VectorXd::NullaryExpr(m, [&] { return nd(gen); }));
    d.k.push_back(MatrixXd::NullaryExpr(m, ch.width(k), [&] { return 0.3 * nd(gen); }));
    d.region.push_back(0);
  }
  return d;
}

}  // namespace

TEST(PropagateMoments, ZeroGainMatchesCovarianceRecursion) {
  SystemModel s = double_integrator(0.3);
  s.a_sigma(0, 1) = 0.1;
  const DiscreteModel dm = discretize(s, 0.1, 7);
  BoundaryConditions b;
  b.mu0 = (VectorXd(4) << 1, -2, 0.5, 0).finished();
  b.mu_t = VectorXd::Zero(4);
  MatrixXd a = MatrixXd::Random(4, 4);
  b.sigma0 = a * a.transpose();
  b.sigma_t = b.sigma0;
  const NoiseChannels ch = NoiseChannels::build(dm, b.sigma0);
  PlannerDecision d;
  for (int k = 0; k < dm.k_prime; ++k) {
    d.v.push_back(VectorXd::Zero(2));
    d.k.push_back(MatrixXd::Zero(2, ch.width(k)));
  }
  const Moments mo = propagate_moments(build_lifted(dm), ch, d, b, dm.delta_t);
  const MatrixXd phi = MatrixXd::Identity(4, 4) + 0.1 * s.a_mu;
  MatrixXd sig = b.sigma0;
  VectorXd mu = b.mu0;
  for (int k = 1; k <= dm.k_prime; ++k) {
    sig = phi * sig * phi.transpose() + 0.1 * s.a_sigma * s.a_sigma.transpose();
    mu = phi * mu;
    EXPECT_LE((mo.cov[k] - sig).norm(), 1e-10 * (1.0 + sig.norm())) << k;
    EXPECT_LE((mo.mean[k] - mu).norm(), 1e-12) << k;
  }
}

TEST(PropagateMoments, DeterministicSystemHasZeroCovariance) {
  const DiscreteModel dm = discretize(double_integrator(0.0), 0.1, 5);
  BoundaryConditions b{VectorXd::Zero(4), VectorXd::Zero(4), MatrixXd::Zero(4, 4), MatrixXd::Zero(4, 4)};
  const NoiseChannels ch = NoiseChannels::build(dm, b.sigma0);
  EXPECT_EQ(ch.width(5), 0);
  PlannerDecision d;
  for (int k = 0; k < 5; ++k) {
    d.v.push_back(VectorXd::Zero(2));
    d.k.push_back(MatrixXd::Zero(2, 0));
  }
  const Moments mo = propagate_moments(build_lifted(dm), ch, d, b, dm.delta_t);
  for (int k = 0; k <= 5; ++k) {
    EXPECT_EQ(mo.cov[k].norm(), 0.0);
    EXPECT_EQ(mo.mean[k].norm(), 0.0);  // v = 0 and mu0 = 0
  }
}

TEST(PropagateMoments, FeedbackMatchesStepRecursion) {
  const DiscreteModel dm = discretize(double_integrator(0.2), 0.1, 6);
  BoundaryConditions b;
  b.mu0 = (VectorXd(4) << 1, 2, 3, 4).finished();
  b.mu_t = VectorXd::Zero(4);
  b.sigma0 = 0.01 * MatrixXd::Identity(4, 4);
  b.sigma0(0, 0) = 0.0;  // rank-deficient initial covariance
  b.sigma_t = b.sigma0;
  const NoiseChannels ch = NoiseChannels::build(dm, b.sigma0);
  EXPECT_EQ(ch.r0(), 3);
  EXPECT_EQ(ch.n_wj(), 2);
  std::mt19937 gen(3);
  const PlannerDecision d = random_decision(ch, 2, 6, gen);
  const Moments mo = propagate_moments(build_lifted(dm), ch, d, b, dm.delta_t);
  const Moments oracle = recursion_oracle(dm, ch, d, b);
  for (int k = 0; k <= 6; ++k) {
    EXPECT_LE((mo.mean[k] - oracle.mean[k]).norm(), 1e-10);
    EXPECT_LE((mo.cov[k] - oracle.cov[k]).norm(), 1e-10);
  }
}

TEST(PropagateMoments, RejectsWrongGainShape) {
  const DiscreteModel dm = discretize(double_integrator(0.2), 0.1, 2);
  BoundaryConditions b{VectorXd::Zero(4), VectorXd::Zero(4), MatrixXd::Identity(4, 4), MatrixXd::Identity(4, 4)};
  const NoiseChannels ch = NoiseChannels::build(dm, b.sigma0);
  PlannerDecision d;
  d.v = {VectorXd::Zero(2), VectorXd::Zero(2)};
  d.k = {MatrixXd::Zero(2, ch.width(0)), MatrixXd::Zero(2, ch.width(0))};
  EXPECT_THROW(propagate_moments(build_lifted(dm), ch, d, b, dm.delta_t), std::invalid_argument);
}

TEST(ExpectedCost, MatchesSampledCost) {
  PlannerProblem p = corridor(4, 0.0);
  const NoiseChannels ch = NoiseChannels::build(p.dm, p.boundary.sigma0);
  std::mt19937 gen(5);
  const PlannerDecision d = random_decision(ch, 2, 4, gen);
  const Moments mo = propagate_moments(build_lifted(p.dm), ch, d, p.boundary, p.dm.delta_t);
  // Monte Carlo over the standardized inputs.
  std::normal_distribution<double> nd;
  const int n_samples = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    VectorXd xi0 = VectorXd::NullaryExpr(ch.r0(), [&] { return nd(gen); });
    std::vector<VectorXd> w;
    VectorXd x = p.boundary.mu0 + ch.e0 * xi0;
    double j = 0.0;
    for (int k = 0; k < 4; ++k) {
      VectorXd z(ch.width(k));
      z.head(ch.r0()) = xi0;
      for (int i = 0; i < k; ++i) z.segment(ch.r0() + 2 * i, 2) = w[i];
      const VectorXd u = d.v[k] + d.k[k] * z;
      w.push_back(VectorXd::NullaryExpr(2, [&] { return nd(gen); }));
      VectorXd dw = VectorXd::Zero(4);
      for (int c = 0; c < 2; ++c) dw[ch.w_cols[c]] = std::sqrt(p.dm.delta_t) * w.back()[c];
      x = p.dm.step(x, u, dw);
      j += x.dot(p.q * x) + u.dot(p.r * u);
    }
    acc += j;
    acc2 += j * j;
  }
  const double mean = acc / n_samples, se = std::sqrt((acc2 / n_samples - mean * mean) / n_samples);
  EXPECT_NEAR(expected_cost(p, mo, d), mean, 4.0 * se);
}

TEST(Assemble, SingleRegionSingleFaceSingleStepCounts) {
  PlannerProblem p = corridor(1, 0.1);
  p.dm = discretize(double_integrator(0.02), 0.5, 1);
  p.safe_set.regions = {ConvexRegion{{face(1, 0, 10)}, {}}};
  const Assembly as = assemble(p, {{100.0}});
  EXPECT_EQ(as.layout.safety_rows, 2);  // endpoints k and k + 1
  EXPECT_EQ(as.program.assignment_columns.size(), 1u);
  EXPECT_EQ(as.program.binaries.size(), 1u);
  EXPECT_EQ(as.program.eq_rhs.size(), 4);  // terminal mean
  EXPECT_EQ(as.program.psd.size(), 1u);    // terminal covariance
  EXPECT_EQ(as.program.nonneg.rows(), 2);
}

TEST(Assemble, RejectsEmptySafeSetAndIndefiniteWeights) {
  PlannerProblem p = corridor(2, 0.1);
  p.safe_set.regions.clear();
  EXPECT_THROW(assemble(p), std::invalid_argument);
  p = corridor(2, 0.1);
  p.q(0, 0) = 0.0;
  EXPECT_THROW(assemble(p), std::invalid_argument);
  p = corridor(2, 0.1);
  p.r = -p.r;
  EXPECT_THROW(assemble(p), std::invalid_argument);
}

TEST(Solve, FarAwayRegionReducesToPlainSteering) {
  PlannerProblem p = corridor(6, 0.0);
  p.safe_set.regions = {ConvexRegion{{face(1, 0, 100), face(-1, 0, 100), face(0, 1, 100), face(0, -1, 100)}, {}}};
  const PlannerSolution with = solve(p);
  p.enforce_safety = false;
  const PlannerSolution without = solve(p);
  ASSERT_EQ(with.status, conic::Status::kOptimal);
  ASSERT_EQ(without.status, conic::Status::kOptimal);
  EXPECT_NEAR(with.objective, without.objective, 1e-6 * without.objective);
  EXPECT_LE(with.max_margin, 1e-8);
}

TEST(Solve, WideRegionIsFeasibleWithCertifiedMargins) {
  PlannerProblem p = corridor(6, 0.1);
  p.safe_set.regions = {ConvexRegion{{face(1, 0, 5), face(-1, 0, 5), face(0, 1, 5), face(0, -1, 5)}, {}}};
  const PlannerSolution sol = solve(p);
  ASSERT_EQ(sol.status, conic::Status::kOptimal);
  EXPECT_LE(max_active_margin(p, sol, p.rho), 1e-8);
}

TEST(Solve, CorridorMeetsBoundaryMomentsAndMargins) {
  const PlannerProblem p = corridor(6, 0.1);
  const PlannerSolution sol = solve(p);
  ASSERT_EQ(sol.status, conic::Status::kOptimal) << sol.message;
  const Moments mo = recursion_oracle(p.dm, sol.channels, sol.decision, p.boundary);
  EXPECT_LE((mo.mean[0] - p.boundary.mu0).norm(), 1e-8);
  EXPECT_LE((mo.mean[6] - p.boundary.mu_t).norm(), 1e-6);
  const MatrixXd slack = p.boundary.sigma_t + 1e-6 * MatrixXd::Identity(4, 4) - mo.cov[6];
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(slack).eigenvalues().minCoeff(), 0.0);
  EXPECT_LE(max_active_margin(p, sol, p.rho), 1e-8);
  // Solver-side margins agree with the independent oracle.
  EXPECT_NEAR(sol.max_margin, max_active_margin(p, sol, p.rho), 1e-9);
  // Both regions are used: the corner cannot be turned inside one strip.
  bool used0 = false, used1 = false;
  for (int r : sol.decision.region) (r == 0 ? used0 : used1) = true;
  EXPECT_TRUE(used0 && used1);
  // The robust plan is also safe for the non-robust program.
  EXPECT_LE(max_active_margin(p, sol, 0.0), 1e-8);
  EXPECT_NEAR(sol.objective, sol.solver_objective, 1e-6 * sol.objective);
}

TEST(Solve, BranchAndBoundMatchesEnumeration) {
  const PlannerProblem p = corridor(6, 0.1);
  const PlannerSolution sol = solve(p);
  ASSERT_EQ(sol.status, conic::Status::kOptimal);
  const Assembly as = assemble(p, sol.big_m);
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << 6); ++mask) {
    conic::ConeProgram prog = as.program;
    for (int k = 0; k < 6; ++k) {
      const int region = (mask >> k) & 1;
      for (int j = 0; j < 2; ++j) prog.lower[as.layout.o[j][k]] = prog.upper[as.layout.o[j][k]] = j == region;
    }
    const auto r = conic::solve_relaxation(prog);
    if (r.status == conic::Status::kOptimal) best = std::min(best, r.objective * r.objective);
  }
  ASSERT_TRUE(std::isfinite(best));
  EXPECT_NEAR(sol.solver_objective, best, 1e-6 * best);
}

TEST(Solve, ObjectiveNondecreasingInRadius) {
  double prev = 0.0;
  for (double rho : {0.0, 0.03, 0.06, 0.1}) {
    const PlannerSolution sol = solve(corridor(6, rho));
    ASSERT_EQ(sol.status, conic::Status::kOptimal) << rho;
    EXPECT_GE(sol.objective, prev * (1.0 - 1e-6)) << rho;
    prev = sol.objective;
  }
}

TEST(Solve, LargeRadiusIsInfeasibleWithDiagnostic) {
  // |c| rho / sqrt(delta_s / 3) = 8.52 exceeds the 8-unit width of both strips.
  const PlannerSolution sol = solve(corridor(6, 1.1));
  EXPECT_EQ(sol.status, conic::Status::kInfeasible);
  EXPECT_NE(sol.diagnostic.find("region 0: face"), std::string::npos) << sol.diagnostic;
  EXPECT_NE(sol.diagnostic.find("region 1: face"), std::string::npos) << sol.diagnostic;
}

TEST(Schedule, ZeroGainIsFeedforward) {
  PlannerSolution sol;
  sol.status = conic::Status::kOptimal;
  const DiscreteModel dm = discretize(double_integrator(0.2), 0.1, 3);
  sol.channels = NoiseChannels::build(dm, 0.01 * MatrixXd::Identity(4, 4));
  for (int k = 0; k < 3; ++k) {
    sol.decision.v.push_back(VectorXd::Constant(2, k + 1.0));
    sol.decision.k.push_back(MatrixXd::Zero(2, sol.channels.width(k)));
  }
  const Schedule s = extract_schedule(sol, dm);
  std::vector<VectorXd> w(3, VectorXd::Ones(2));
  for (int k = 0; k < 3; ++k) EXPECT_EQ(s.input(k, VectorXd::Ones(4), w), sol.decision.v[k]);
  EXPECT_THROW(s.input(3, VectorXd::Ones(4), w), std::out_of_range);
}

TEST(Schedule, ZeroRealizationGivesFeedforwardAndFeedbackIsCausal) {
  const PlannerProblem p = corridor(6, 0.1);
  const PlannerSolution sol = solve(p);
  ASSERT_EQ(sol.status, conic::Status::kOptimal);
  const Schedule s = extract_schedule(sol, p.dm);
  const VectorXd xi0 = VectorXd::Zero(s.channels.r0());
  std::vector<VectorXd> zero(6, VectorXd::Zero(2)), bumped = zero;
  for (int k = 0; k < 6; ++k) EXPECT_LE((s.input(k, xi0, zero) - sol.decision.v[k]).norm(), 1e-14);
  bumped[3] = VectorXd::Constant(2, 5.0);
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(s.input(k, xi0, bumped), s.input(k, xi0, zero)) << k;
}
