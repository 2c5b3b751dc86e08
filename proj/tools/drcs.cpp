// drcs: plan, simulate, validate and render distributionally robust covariance-steering runs.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "drcs/errors.hpp"
#include "drcs/pipeline.hpp"
#include "drcs/render.hpp"

namespace fs = std::filesystem;
using namespace drcs;

namespace {

enum Exit { kOk = 0, kParse = 2, kInfeasible = 3, kNumerical = 4, kValidationFail = 5 };

constexpr const char* kOutEnv = "DRCS_OUT_DIR";

std::string default_out() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? env : ".";
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_timings(const std::string& path, const std::string& body) { write_file(path, "{\n" + body + "\n}\n"); }

int cmd_plan(const std::string& scenario_path, const std::string& out, std::optional<double> gap_tol,
             const std::string& cone_path) {
  const Scenario sc = load_scenario(scenario_path);
  const auto t0 = std::chrono::steady_clock::now();
  const PlannerSolution sol = plan_scenario(sc, gap_tol);
  const double secs = since(t0);
  if (!cone_path.empty()) {
    std::ostringstream cone;
    conic::dump(assemble(sc.planner_problem(), sol.big_m).program, cone);
    write_file(cone_path, cone.str());
  }
  write_file(path_in(out, "solution.json"), solution_json(sol, sc));
  write_timings(path_in(out, "plan_timings.json"), " \"plan_seconds\": " + std::to_string(secs));
  switch (sol.status) {
    case conic::Status::kOptimal:
      break;
    case conic::Status::kInfeasible:
      std::cerr << "infeasible: " << sol.message << "\n" << sol.diagnostic << "\n";
      return kInfeasible;
    default:
      std::cerr << "solver failure: " << sol.message << "\n";
      return kNumerical;
  }
  write_file(path_in(out, "schedule.csv"), schedule_csv(sol, sc.delta_t));
  std::printf("optimal  objective %.6g  max margin %.3g  nodes %d  %.2f s\n", sol.objective, sol.max_margin,
              sol.stats.nodes, secs);
  std::printf("wrote %s and %s\n", path_in(out, "solution.json").c_str(), path_in(out, "schedule.csv").c_str());
  return kOk;
}

struct SimulateArgs {
  std::string scenario, solution, out;
  std::optional<int> paths;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_l1 = false, no_feedback = false, save_ensembles = false;
};

int cmd_simulate(const SimulateArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  const LoadedSolution sol = parse_solution(read_file(a.solution), a.solution);
  check_compatible(sc, sol);
  RunOptions o = default_run_options(sc);
  if (a.paths) o.paths = *a.paths;
  if (a.seed) o.seed = *a.seed;
  if (a.threads) o.threads = *a.threads;
  o.l1 = !a.no_l1;
  o.feedback = !a.no_feedback;
  if (o.paths < 1) throw ParseError("--paths", "must be positive");
  if (o.threads < 1) throw ParseError("--threads", "must be positive");

  const SimulationRun run = run_simulation(sc, sol.solution, sol.file_hash, o);
  write_file(path_in(a.out, "report.json"), report_json(run.report));
  write_file(path_in(a.out, "steps.csv"), steps_csv(run.report));
  write_timings(path_in(a.out, "simulate_timings.json"),
                " \"simulate_seconds\": " + std::to_string(run.simulate_seconds) +
                    ",\n \"statistics_seconds\": " + std::to_string(run.statistics_seconds) +
                    ",\n \"threads\": " + std::to_string(o.threads));
  if (a.save_ensembles) {
    const std::pair<const PathEnsemble*, const char*> all[] = {
        {&run.grid_nominal, "nominal_grid"}, {&run.nominal, "nominal"}, {&run.truth, "truth"}};
    for (const auto& [e, label] : all) {
      const EnsembleFiles f = ensemble_files(*e, sc.hash, label);
      write_file(path_in(a.out, std::string(label) + ".bin"), f.data);
      write_file(path_in(a.out, std::string(label) + ".json"), f.sidecar);
    }
  }
  std::printf("%d paths, L1 %s: max W2 %.4g (rho %.4g), simulate %.1f s, statistics %.1f s\n", o.paths,
              o.l1 && sc.l1 ? "on" : "off", run.report.sim.max_w2(), run.report.sim.rho, run.simulate_seconds,
              run.statistics_seconds);
  std::printf("wrote %s\n", path_in(a.out, "report.json").c_str());
  return kOk;
}

int cmd_validate(const std::string& report_path) {
  const RunReport r = parse_report(read_file(report_path), report_path);
  bool all = true;
  for (const auto& p : evaluate_report(r)) {
    std::printf("%-4s  %-44s  %s\n", p.pass ? "PASS" : "FAIL", p.name.c_str(), p.detail.c_str());
    all = all && p.pass;
  }
  return all ? kOk : kValidationFail;
}

int cmd_render(const std::string& report_path, const std::string& out) {
  const RunReport r = parse_report(read_file(report_path), report_path);
  std::string fan, w2;
  try {
    fan = render_fan_svg(r);
    w2 = render_w2_svg(r);
  } catch (const std::invalid_argument& e) {
    throw ParseError(report_path, e.what());
  }
  write_file(path_in(out, "trajectories.svg"), fan);
  write_file(path_in(out, "w2.svg"), w2);
  std::printf("wrote %s and %s\n", path_in(out, "trajectories.svg").c_str(), path_in(out, "w2.svg").c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust covariance steering with L1 adaptive augmentation"};
  app.require_subcommand(1);
  std::string out = default_out();
  const std::string out_help = std::string("Output directory (default: $") + kOutEnv + " or .)";

  std::string scenario_path, solution_path, report_path;
  std::optional<double> gap_tol;
  std::string cone_path;
  auto* plan = app.add_subcommand("plan", "Solve the planning problem of a scenario");
  plan->add_option("scenario", scenario_path, "Scenario JSON")->required();
  plan->add_option("--out", out, out_help);
  plan->add_option("--gap-tol", gap_tol, "Relative branch-and-bound gap on the expected cost");
  plan->add_option("--dump-cone", cone_path, "Also write the mixed-integer conic program (drcs-cone/1 text)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run nominal and true ensembles against a plan");
  simulate->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  simulate->add_option("solution", sim.solution, "solution.json from plan")->required();
  simulate->add_option("--out", out, out_help);
  simulate->add_option("--paths", sim.paths, "Number of Monte Carlo paths");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--threads", sim.threads, "Worker threads (results do not depend on it)");
  simulate->add_flag("--no-l1", sim.no_l1, "Disable the adaptive augmentation (ablation)");
  simulate->add_flag("--no-feedback", sim.no_feedback, "Apply only the feedforward part of the plan");
  simulate->add_flag("--save-ensembles", sim.save_ensembles, "Also write the ensembles as raw arrays");

  auto* validate = app.add_subcommand("validate", "Check a report against the safety and ambiguity predicates");
  validate->add_option("report", report_path, "report.json from simulate")->required();

  auto* render = app.add_subcommand("render", "Write SVG plots of a report");
  render->add_option("report", report_path, "report.json from simulate")->required();
  render->add_option("--out", out, out_help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*plan) return cmd_plan(scenario_path, out, gap_tol, cone_path);
    if (*simulate) {
      sim.out = out;
      return cmd_simulate(sim);
    }
    if (*validate) return cmd_validate(report_path);
    if (*render) return cmd_render(report_path, out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kParse;
}
