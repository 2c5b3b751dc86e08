#include "drcs/pipeline.hpp"

#include <chrono>
#include <cstdio>

#include "drcs/errors.hpp"

namespace drcs {

namespace {

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

}  // namespace

PlannerSolution plan_scenario(const Scenario& sc, std::optional<double> gap_tol) {
  PlannerProblem p = sc.planner_problem();
  if (gap_tol) {
    if (!(*gap_tol >= 0.0)) throw std::invalid_argument("gap tolerance must be nonnegative");
    p.bnb.gap_tol = *gap_tol;
  }
  return solve(p);
}

RunOptions default_run_options(const Scenario& sc) {
  RunOptions o;
  o.paths = sc.monte_carlo.paths;
  o.seed = sc.monte_carlo.seed;
  o.threads = sc.monte_carlo.threads;
  return o;
}

void check_compatible(const Scenario& sc, const LoadedSolution& sol) {
  if (sol.scenario_hash != sc.hash)
    throw ParseError("scenario_hash", "solution was planned for scenario " + sol.scenario_hash + ", not " + sc.hash);
  if (sol.solution.status != conic::Status::kOptimal)
    throw ParseError("status", std::string("solution is ") + conic::to_string(sol.solution.status));
  if (static_cast<int>(sol.solution.decision.v.size()) != sc.k_prime)
    throw ParseError("steps", "solution horizon differs from the scenario");
}

SimulationRun run_simulation(const Scenario& sc, const PlannerSolution& sol, const std::string& solution_hash,
                             const RunOptions& opts) {
  if (opts.paths < 1) throw std::invalid_argument("number of paths must be positive");
  const PlannerProblem problem = sc.planner_problem();
  const Schedule schedule = extract_schedule(sol, problem.dm);
  const UncertaintyFunctions unc = make_functions(sc.uncertainty, sc.model.m(), sc.model.n_w());

  SimulationRun run;
  const auto t0 = std::chrono::steady_clock::now();
  SimulationOptions so;
  so.n_paths = opts.paths;
  so.seed = opts.seed;
  so.feedback = opts.feedback;
  so.threads = opts.threads;
  so.substeps = 1;
  run.grid_nominal = simulate_nominal(sc.model, schedule, sc.boundary, so);
  so.substeps = sc.substeps;
  run.nominal = simulate_nominal(sc.model, schedule, sc.boundary, so);
  const std::optional<ControlParams> l1 = opts.l1 ? sc.l1 : std::nullopt;
  run.truth = simulate_true(sc.model, unc, schedule, l1, sc.boundary, so);
  run.simulate_seconds = since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  ReportInputs in;
  in.solution = &sol;
  in.safe_set = &sc.safe_set;
  in.delta_s = sc.delta_s;
  in.rho = problem.rho;
  in.w2_points = sc.monte_carlo.w2_points;
  in.w2_replicates = sc.monte_carlo.w2_replicates;
  in.l1_enabled = l1.has_value();
  in.feedback = opts.feedback;
  in.seed = opts.seed;
  in.threads = opts.threads;

  RunReport& r = run.report;
  r.sim = build_report(run.nominal, run.truth, in);
  r.scenario_hash = sc.hash;
  r.solution_hash = solution_hash;
  r.substeps = sc.substeps;
  r.region = sol.decision.region;
  r.mu_t = sc.boundary.mu_t;
  r.sigma_t = sc.boundary.sigma_t;
  const EmpiricalMoments end = empirical_moments(run.grid_nominal, sc.k_prime);
  r.steering = {opts.paths, end.mean, end.cov};
  r.safe_set = sc.safe_set;
  r.projection = sc.projection;
  if (const auto c = sc.certified_rho()) r.certified_rho = c->rho;
  const int fan = std::min(opts.fan_paths, opts.paths);
  for (int p = 0; p < fan; ++p) {
    MatrixXd path(2, sc.k_prime + 1);
    for (int k = 0; k <= sc.k_prime; ++k) {
      const auto x = run.truth.state(p, k);
      path(0, k) = x[sc.projection[0]];
      path(1, k) = x[sc.projection[1]];
    }
    r.fan.push_back(std::move(path));
  }
  run.statistics_seconds = since(t1);
  return run;
}

SteeringCheck check_steering(const SteeringSample& s, const VectorXd& mu_t, const MatrixXd& sigma_t) {
  SteeringCheck c;
  if (s.n_paths < 1 || s.mean.size() != mu_t.size()) return c;
  c.mean_error = (s.mean - mu_t).norm();
  c.standard_error = std::sqrt(std::max(0.0, s.cov.trace()) / s.n_paths);
  const MatrixXd excess = s.cov - sigma_t - 0.05 * MatrixXd::Identity(mu_t.size(), mu_t.size());
  c.max_excess_eigenvalue = max_eigenvalue(0.5 * (excess + excess.transpose()));
  c.ok = c.mean_error <= 3.0 * c.standard_error && c.max_excess_eigenvalue <= 0.0;
  return c;
}

std::vector<Predicate> evaluate_report(const RunReport& r) {
  const auto& sim = r.sim;
  std::vector<Predicate> out;

  Predicate viol{"violation rate upper 95% bound <= delta_s", true, ""};
  double worst = 0.0;
  int worst_step = 0;
  for (const auto& s : sim.steps) {
    const RateInterval w = wilson_interval(s.violation.hits, s.violation.n);
    if (w.upper > worst) {
      worst = w.upper;
      worst_step = s.step;
    }
    if (w.upper > sim.delta_s) viol.pass = false;
  }
  viol.detail = fmt("max upper bound %.6g at step %d, delta_s %g", worst, worst_step, sim.delta_s);
  out.push_back(viol);

  Predicate cvar{"tail CVaR of safe-set loss <= 2 SE", true, ""};
  double worst_slack = -1e300;
  for (const auto& s : sim.steps) {
    const double slack = s.loss_cvar.value - 2.0 * s.loss_cvar.standard_error;
    worst_slack = std::max(worst_slack, slack);
    if (slack > 0.0) cvar.pass = false;
  }
  cvar.detail = fmt("max of (CVaR - 2 SE) %.6g", worst_slack);
  out.push_back(cvar);

  Predicate w2{"empirical W2(true, nominal) <= rho", true, ""};
  double wmax = 0.0;
  for (const auto& s : sim.steps) {
    wmax = std::max(wmax, s.w2_true_nominal.value);
    if (s.w2_true_nominal.value > sim.rho) w2.pass = false;
  }
  w2.detail = fmt("max W2 %.6g, rho %.6g", wmax, sim.rho);
  out.push_back(w2);

  const SteeringCheck st = check_steering(r.steering, r.mu_t, r.sigma_t);
  Predicate moments{"terminal moments met", st.ok, ""};
  moments.detail = fmt("|mean - mu_T| %.3g vs 3 SE %.3g, max eig(cov - sigma_T - 0.05 I) %.3g", st.mean_error,
                       3.0 * st.standard_error, st.max_excess_eigenvalue);
  out.push_back(moments);
  return out;
}

}  // namespace drcs
