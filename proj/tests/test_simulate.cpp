#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "drcs/simulate.hpp"
#include "drcs/uncertainty.hpp"
#include "fixtures.hpp"

using namespace drcs;
using namespace drcs::fixtures;

namespace {

struct Case {
  SystemModel model;
  DiscreteModel dm;
  BoundaryConditions boundary;
  Schedule schedule;
};

// Hand-made schedule with nonzero feedback on every channel.
Case feedback_setup(double sigma, double sigma0, int kp = 5, double dt = 0.1) {
  Case s;
  s.model = double_integrator(sigma);
  s.dm = discretize(s.model, dt, kp);
  s.boundary.mu0 = (VectorXd(4) << 1.0, -1.0, 0.5, 0.0).finished();
  s.boundary.mu_t = VectorXd::Zero(4);
  s.boundary.sigma0 = sigma0 * MatrixXd::Identity(4, 4);
  s.boundary.sigma_t = s.boundary.sigma0;
  s.schedule.delta_t = dt;
  s.schedule.channels = NoiseChannels::build(s.dm, s.boundary.sigma0);
  std::mt19937 gen(9);
  std::normal_distribution<double> nd;
  for (int k = 0; k < kp; ++k) {
    s.schedule.v.push_back(VectorXd::NullaryExpr(2, [&] { return nd(gen); }));
    s.schedule.k.push_back(MatrixXd::NullaryExpr(2, s.schedule.channels.width(k), [&] { return 0.5 * nd(gen); }));
  }
  return s;
}

PlannerDecision decision_of(const Schedule& s) {
  PlannerDecision d;
  d.v = s.v;
  d.k = s.k;
  d.region.assign(s.v.size(), 0);
  return d;
}

PathEnsemble fixture_ensemble(const std::vector<VectorXd>& points) {
  PathEnsemble e;
  e.n_paths = static_cast<int>(points.size());
  e.k_prime = 0;
  e.n = static_cast<int>(points.front().size());
  for (const auto& p : points) e.data.insert(e.data.end(), p.data(), p.data() + p.size());
  return e;
}

}  // namespace

TEST(SimulateNominal, DeterministicSystemMatchesRollout) {
  Case s = feedback_setup(0.0, 0.0);
  SimulationOptions o;
  o.n_paths = 5;
  const PathEnsemble e = simulate_nominal(s.model, s.schedule, s.boundary, o);
  VectorXd u(10);
  for (int k = 0; k < 5; ++k) u.segment(2 * k, 2) = s.schedule.v[k];
  const VectorXd stacked = rollout(s.dm, s.boundary.mu0, u, VectorXd::Zero(20));
  for (int p = 0; p < 5; ++p)
    for (int k = 1; k <= 5; ++k) EXPECT_LE((e.state(p, k) - stacked.segment(4 * (k - 1), 4)).norm(), 1e-13);
}

TEST(SimulateNominal, OneStepMeanWithinThreeStandardErrors) {
  Case s = feedback_setup(0.3, 0.04);
  SimulationOptions o;
  o.n_paths = 10000;
  o.seed = 21;
  const PathEnsemble e = simulate_nominal(s.model, s.schedule, s.boundary, o);
  const EmpiricalMoments m = empirical_moments(e, 1);
  const VectorXd exact = s.dm.transition * s.boundary.mu0 + s.dm.input * s.schedule.v[0];
  for (int i = 0; i < 4; ++i) EXPECT_LE(std::abs(m.mean[i] - exact[i]), 3.0 * std::sqrt(m.cov(i, i) / 1e4)) << i;
}

TEST(SimulateNominal, CovarianceMatchesPlannedMoments) {
  Case s = feedback_setup(0.3, 0.04);
  SimulationOptions o;
  o.n_paths = 10000;
  o.seed = 4;
  const PathEnsemble e = simulate_nominal(s.model, s.schedule, s.boundary, o);
  const Moments mo = propagate_moments(build_lifted(s.dm), s.schedule.channels, decision_of(s.schedule), s.boundary,
                                       s.dm.delta_t);
  int outside = 0, total = 0;
  for (int k = 1; k <= 5; ++k) {
    const EmpiricalMoments m = empirical_moments(e, k);
    const MatrixXd& c = mo.cov[k];
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / 1e4);
        ++total;
        if (std::abs(m.cov(i, j) - c(i, j)) > 3.0 * se) ++outside;
      }
  }
  // 50 entries; a 3-SE miss has probability 0.0027 each.
  EXPECT_LE(outside, 1) << outside << " of " << total;
}

TEST(SimulateNominal, SeedAndThreadDeterminism) {
  Case s = feedback_setup(0.3, 0.04);
  SimulationOptions o;
  o.n_paths = 257;
  o.substeps = 3;
  const PathEnsemble a = simulate_nominal(s.model, s.schedule, s.boundary, o);
  o.threads = 4;
  const PathEnsemble b = simulate_nominal(s.model, s.schedule, s.boundary, o);
  EXPECT_EQ(a.data, b.data);
  o.seed = 2;
  EXPECT_NE(a.data, simulate_nominal(s.model, s.schedule, s.boundary, o).data);
}

TEST(SimulateNominal, FeedforwardOnlyIgnoresGains) {
  Case s = feedback_setup(0.0, 0.0);
  SimulationOptions o;
  o.n_paths = 3;
  o.feedback = false;
  const PathEnsemble a = simulate_nominal(s.model, s.schedule, s.boundary, o);
  for (auto& g : s.schedule.k) g.setZero();
  o.feedback = true;
  EXPECT_EQ(a.data, simulate_nominal(s.model, s.schedule, s.boundary, o).data);
}

TEST(SimulateNominal, RejectsInvalidInput) {
  Case s = feedback_setup(0.3, 0.04);
  SimulationOptions o;
  o.n_paths = 0;
  EXPECT_THROW(simulate_nominal(s.model, s.schedule, s.boundary, o), std::invalid_argument);
  o.n_paths = 2;
  s.schedule.k.pop_back();
  EXPECT_THROW(simulate_nominal(s.model, s.schedule, s.boundary, o), std::invalid_argument);
}

TEST(SimulateTrue, WithoutUncertaintyMatchesNominalWithinFloor) {
  Case s = feedback_setup(0.3, 0.04);
  SimulationOptions o;
  o.n_paths = 1000;
  o.substeps = 2;
  const PathEnsemble nominal = simulate_nominal(s.model, s.schedule, s.boundary, o);
  const PathEnsemble truth = simulate_true(s.model, UncertaintyFunctions::none(2, 4), s.schedule, std::nullopt,
                                           s.boundary, o);
  o.seed = 99;
  const PathEnsemble nominal2 = simulate_nominal(s.model, s.schedule, s.boundary, o);
  const W2Estimate floor = ensemble_w2(nominal, nominal2, 5, 250, 4, 1);
  const W2Estimate w = ensemble_w2(truth, nominal, 5, 250, 4, 1);
  EXPECT_LE(w.value, floor.value + 3.0 * std::hypot(floor.standard_error, w.standard_error));
}

TEST(SimulateTrue, MatchedDriftShiftsEnsembleAndL1Recovers) {
  Case s = feedback_setup(0.05, 1e-4, 10, 0.1);
  UncertaintySpec spec;
  DriftTerm d;
  d.kind = DriftTerm::Kind::kConstant;
  d.h0 = (VectorXd(2) << 2.0, -2.0).finished();
  spec.drift.push_back(d);
  const UncertaintyFunctions unc = make_functions(spec, 2, 4);
  SimulationOptions o;
  o.n_paths = 1000;
  o.substeps = 10;
  const PathEnsemble nominal = simulate_nominal(s.model, s.schedule, s.boundary, o);
  o.seed = 99;
  const PathEnsemble nominal2 = simulate_nominal(s.model, s.schedule, s.boundary, o);
  const PathEnsemble open = simulate_true(s.model, unc, s.schedule, std::nullopt, s.boundary, o);
  ControlParams l1{200.0, 0.01, 10.0};
  const PathEnsemble closed = simulate_true(s.model, unc, s.schedule, l1, s.boundary, o);
  const W2Estimate floor = ensemble_w2(nominal, nominal2, 10, 250, 4, 1);
  const W2Estimate w_open = ensemble_w2(open, nominal, 10, 250, 4, 1);
  const W2Estimate w_closed = ensemble_w2(closed, nominal, 10, 250, 4, 1);
  EXPECT_GE(w_open.value, 3.0 * floor.value);
  EXPECT_LT(w_closed.value, 0.25 * w_open.value);
}

TEST(SimulateTrue, RejectsSubstepThatDoesNotDivideSamplingPeriod) {
  Case s = feedback_setup(0.05, 1e-4);
  SimulationOptions o;
  o.n_paths = 2;
  o.substeps = 3;
  ControlParams l1{10.0, 0.05, 1.0};
  EXPECT_THROW(simulate_true(s.model, UncertaintyFunctions::none(2, 4), s.schedule, l1, s.boundary, o),
               std::invalid_argument);
}

TEST(Wilson, KnownInterval) {
  const RateInterval r = wilson_interval(10, 100);
  EXPECT_NEAR(r.rate, 0.1, 1e-15);
  EXPECT_NEAR(r.lower, 0.0552, 1e-4);
  EXPECT_NEAR(r.upper, 0.1744, 1e-4);
  const RateInterval z = wilson_interval(0, 10000);
  EXPECT_EQ(z.lower, 0.0);
  EXPECT_NEAR(z.upper, 3.84 / (10000 + 3.84), 1e-5);
}

TEST(ViolationRate, FixturesAndPermutationInvariance) {
  SafeSet set;
  set.regions = {ConvexRegion{{face(1, 0, 0)}, {}}};
  std::vector<VectorXd> inside, outside, half;
  for (int i = 0; i < 100; ++i) {
    VectorXd in = VectorXd::Zero(4), out = VectorXd::Zero(4);
    in[0] = -1.0 - i;
    out[0] = 1.0 + i;
    inside.push_back(in);
    outside.push_back(out);
    half.push_back(i % 2 ? in : out);
  }
  EXPECT_EQ(violation_rate(fixture_ensemble(inside), set)[0].rate, 0.0);
  EXPECT_EQ(violation_rate(fixture_ensemble(outside), set)[0].rate, 1.0);
  const RateInterval h = violation_rate(fixture_ensemble(half), set)[0];
  EXPECT_EQ(h.rate, 0.5);
  EXPECT_LT(h.lower, 0.5);
  EXPECT_GT(h.upper, 0.5);
  std::reverse(half.begin(), half.end());
  std::rotate(half.begin(), half.begin() + 17, half.end());
  const RateInterval g = violation_rate(fixture_ensemble(half), set)[0];
  EXPECT_EQ(g.rate, h.rate);
  EXPECT_EQ(g.upper, h.upper);
}

TEST(TailMean, MatchesDirectComputation) {
  std::vector<double> x{5, 1, 4, 2, 3, 10, 0, 7, 6, 8};
  const TailMean t = tail_mean(x, 0.3);  // top 3: 10, 8, 7
  EXPECT_NEAR(t.value, 25.0 / 3.0, 1e-14);
  EXPECT_NEAR(t.standard_error, std::sqrt((25.0 / 9 + 1.0 / 9 + 16.0 / 9) / 2.0 / 3.0), 1e-12);
  EXPECT_THROW(tail_mean({}, 0.1), std::invalid_argument);
}

TEST(Subsample, DistinctDeterministicIndices) {
  const auto a = subsample_paths(100, 40, 3);
  EXPECT_EQ(a, subsample_paths(100, 40, 3));
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_GE(sorted.front(), 0);
  EXPECT_LT(sorted.back(), 100);
  EXPECT_THROW(subsample_paths(10, 11, 3), std::invalid_argument);
}

TEST(SafetyVerdict, SafeScenarioPassesAndPlantedViolationFails) {
  PlannerProblem p = corridor(6, 0.05);
  const PlannerSolution sol = solve(p);
  ASSERT_EQ(sol.status, conic::Status::kOptimal);
  const Schedule sched = extract_schedule(sol, p.dm);
  const SystemModel model = double_integrator(0.02);
  SimulationOptions o;
  o.n_paths = 2000;
  const PathEnsemble nominal = simulate_nominal(model, sched, p.boundary, o);
  const PathEnsemble truth = simulate_true(model, UncertaintyFunctions::none(2, 4), sched, std::nullopt, p.boundary, o);
  ReportInputs in;
  in.solution = &sol;
  in.safe_set = &p.safe_set;
  in.delta_s = p.delta_s;
  in.rho = p.rho;
  in.w2_points = 500;
  in.w2_replicates = 2;
  SimulationReport rep = build_report(nominal, truth, in);
  ASSERT_EQ(rep.steps.size(), 7u);
  EXPECT_TRUE(verify_safety(rep, p.delta_s).ok) << verify_safety(rep, p.delta_s).reason;
  for (const auto& s : rep.steps)
    for (const auto& f : s.faces) EXPECT_LT(f.cvar.value, 0.0);
  rep.steps[3].violation = wilson_interval(1000, 2000);
  const SafetyVerdict v = verify_safety(rep, p.delta_s);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.first_failing_step, 3);
}
