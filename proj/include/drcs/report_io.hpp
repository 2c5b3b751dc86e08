#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "drcs/scenario.hpp"
#include "drcs/simulate.hpp"

namespace drcs {

inline constexpr const char* kSolutionSchema = "drcs-solution/1";
inline constexpr const char* kReportSchema = "drcs-report/1";
inline constexpr const char* kEnsembleSchema = "drcs-ensemble/1";

/// Planner output as written by `drcs plan`.
std::string solution_json(const PlannerSolution& sol, const Scenario& sc);

/// Feedforward inputs and assigned regions, one row per step.
std::string schedule_csv(const PlannerSolution& sol, double delta_t);

struct LoadedSolution {
  std::string scenario_hash;
  std::string file_hash;  // SHA-256 of the file bytes
  PlannerSolution solution;
};
/// Reads back what solution_json wrote (status, decision, channels, moments, margins).
LoadedSolution parse_solution(const std::string& text, const std::string& source = "solution");

/// Nominal ensemble on the planner's own grid, final step only.
struct SteeringSample {
  int n_paths = 0;
  VectorXd mean;
  MatrixXd cov;
};

/// Everything `validate` and `render` need, recomputable from the stored raw statistics.
struct RunReport {
  std::string scenario_hash, solution_hash;
  SimulationReport sim;
  int substeps = 1;
  std::vector<int> region;           // per segment, from the plan
  VectorXd mu_t;
  MatrixXd sigma_t;
  SteeringSample steering;
  SafeSet safe_set;
  std::array<int, 2> projection{0, 1};
  std::optional<double> certified_rho;
  std::vector<MatrixXd> fan;         // projected true paths, 2 x (k'+1) each
};

std::string report_json(const RunReport& r);
/// Throws ParseError for missing sections or fields.
RunReport parse_report(const std::string& text, const std::string& source = "report");

/// Per-step summary table.
std::string steps_csv(const RunReport& r);

/// Raw little-endian float64 array [path][step][state] and its JSON sidecar.
struct EnsembleFiles {
  std::string data, sidecar;
};
EnsembleFiles ensemble_files(const PathEnsemble& e, const std::string& scenario_hash, const std::string& label);

std::string read_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_file(const std::string& path, const std::string& content);

}  // namespace drcs
