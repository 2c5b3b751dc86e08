#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "conic_internal.hpp"

namespace drcs::conic {
namespace {

struct Node {
  double bound;
  long id;
  std::vector<std::pair<int, double>> fixes;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

bool lex_less(const VectorXd& a, const VectorXd& b, const std::vector<int>& idx) {
  for (int i : idx) {
    const double x = std::round(a[i]), y = std::round(b[i]);
    if (x != y) return x < y;
  }
  return false;
}

}  // namespace

SolveResult branch_and_bound(const ConeProgram& prog, const BranchAndBoundOptions& opts) {
  prog.validate();
  SolveResult best;
  best.status = Status::kInfeasible;
  double incumbent = std::numeric_limits<double>::infinity();
  long next_id = 0;
  int failures = 0;

  std::vector<int> col_of(prog.num_vars, -1);
  for (std::size_t c = 0; c < prog.assignment_columns.size(); ++c)
    for (int i : prog.assignment_columns[c]) col_of[i] = static_cast<int>(c);

  auto solve_node = [&](const std::vector<std::pair<int, double>>& fixes) {
    VectorXd lo = prog.lower, hi = prog.upper;
    for (const auto& [i, v] : fixes) lo[i] = hi[i] = v;
    SolveResult r = detail::solve_with_bounds(prog, lo, hi, opts.relaxation);
    best.stats.nodes += 1;
    best.stats.iterations += r.stats.iterations;
    return r;
  };
  auto tol_of = [&](double inc) { return opts.gap_tol * std::max(1.0, std::abs(inc)); };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  open.push({-std::numeric_limits<double>::infinity(), next_id++, {}});
  double proven = std::numeric_limits<double>::infinity();
  bool root = true;

  while (!open.empty()) {
    Node node = open.top();
    if (std::isfinite(incumbent) && node.bound >= incumbent - tol_of(incumbent)) {
      proven = std::min(proven, node.bound);
      break;  // best-first: every remaining node is no better
    }
    open.pop();
    if (best.stats.nodes >= opts.max_nodes) {
      proven = std::min(proven, node.bound);
      best.message = "node limit reached";
      break;
    }
    SolveResult r = solve_node(node.fixes);
    if (r.status == Status::kUnbounded) {
      best.status = Status::kUnbounded;
      best.message = "relaxation unbounded";
      return best;
    }
    if (r.status == Status::kNumericalFailure) {
      ++failures;
      continue;
    }
    if (r.status != Status::kOptimal) continue;
    if (root) {
      best.stats.primal_residual = r.stats.primal_residual;
      best.stats.dual_residual = r.stats.dual_residual;
      root = false;
    }
    if (std::isfinite(incumbent) && r.bound >= incumbent - tol_of(incumbent)) continue;

    // Choose a branching target.
    int col = -1, region = -1, single = -1;
    double worst = opts.integrality_tol;
    for (std::size_t c = 0; c < prog.assignment_columns.size(); ++c) {
      const auto& vars = prog.assignment_columns[c];
      int arg = -1;
      double mx = -1.0;
      for (int i : vars)
        if (r.x[i] > mx) {
          mx = r.x[i];
          arg = i;
        }
      const double frac = 1.0 - mx;
      if (frac > worst) {
        worst = frac;
        col = static_cast<int>(c);
        region = arg;
      }
    }
    if (col < 0) {
      double fmax = opts.integrality_tol;
      for (int i : prog.binaries) {
        if (col_of[i] >= 0) continue;
        const double f = std::min(r.x[i], 1.0 - r.x[i]);
        if (f > fmax) {
          fmax = f;
          single = i;
        }
      }
    }

    if (col < 0 && single < 0) {
      // Integral within tolerance: pin every binary and re-solve so the continuous part is exact.
      std::vector<std::pair<int, double>> fixes;
      for (int i : prog.binaries) fixes.emplace_back(i, std::round(r.x[i]));
      SolveResult leaf = solve_node(fixes);
      if (leaf.status != Status::kOptimal) {
        if (leaf.status == Status::kNumericalFailure) ++failures;
        continue;
      }
      const bool have = std::isfinite(incumbent);
      const bool better = !have || leaf.objective < incumbent - tol_of(incumbent) * 1e-3;
      const bool tie = have && std::abs(leaf.objective - incumbent) <= tol_of(incumbent) * 1e-3;
      if (better || (tie && lex_less(leaf.x, best.x, prog.binaries))) {
        incumbent = leaf.objective;
        best.x = leaf.x;
        best.objective = leaf.objective;
        best.status = Status::kOptimal;
      }
      continue;
    }

    std::vector<std::pair<int, double>> fix_child = node.fixes, forbid_child = node.fixes;
    if (col >= 0) {
      for (int i : prog.assignment_columns[col]) fix_child.emplace_back(i, i == region ? 1.0 : 0.0);
      forbid_child.emplace_back(region, 0.0);
    } else {
      fix_child.emplace_back(single, 1.0);
      forbid_child.emplace_back(single, 0.0);
    }
    open.push({r.bound, next_id++, std::move(fix_child)});
    open.push({r.bound, next_id++, std::move(forbid_child)});
  }

  if (best.status == Status::kOptimal) {
    best.bound = open.empty() && std::isinf(proven) ? best.objective : std::min(proven, best.objective);
    if (failures > 0)
      best.message += (best.message.empty() ? "" : "; ") + std::to_string(failures) +
                      " node relaxation(s) failed numerically";
  } else if (failures > 0) {
    best.status = Status::kNumericalFailure;
    best.message = "no incumbent; " + std::to_string(failures) + " node relaxation(s) failed numerically";
  }
  return best;
}

}  // namespace drcs::conic
