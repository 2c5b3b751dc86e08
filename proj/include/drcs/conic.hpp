#pragma once

#include <iosfwd>
#include <limits>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "drcs/linalg.hpp"

namespace drcs::conic {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// `map * x + offset` lies in the cone of the block.
struct AffineBlock {
  SparseRM map;
  VectorXd offset;
  int rows() const { return static_cast<int>(offset.size()); }
};

/// Semidefinite block: the dim x dim symmetric matrix whose column-major full
/// vectorization is `map * x + offset` must be positive semidefinite.
struct PsdBlock {
  int dim = 0;
  SparseRM map;
  VectorXd offset;
};

/// Mixed-integer conic program
///
///   minimize    objective' x
///   subject to  eq_matrix x = eq_rhs
///               nonneg.map x + nonneg.offset >= 0
///               soc[i].map x + soc[i].offset  in second-order cone (first entry is the bound)
///               psd[j]                         positive semidefinite
///               lower <= x <= upper,  x_i in {0, 1} for i in binaries.
///
/// Each entry of `assignment_columns` lists binaries of which exactly one is 1;
/// the solver adds the sum-to-one equality itself.
struct ConeProgram {
  int num_vars = 0;
  VectorXd objective;
  SparseRM eq_matrix;
  VectorXd eq_rhs;
  AffineBlock nonneg;
  std::vector<AffineBlock> soc;
  std::vector<PsdBlock> psd;
  std::vector<int> binaries;
  std::vector<std::vector<int>> assignment_columns;
  VectorXd lower;
  VectorXd upper;

  /// Throws std::invalid_argument when dimensions or indices are inconsistent.
  void validate() const;
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

const char* to_string(Status s);

struct SolveStats {
  int iterations = 0;  // interior-point iterations (summed over nodes for branch-and-bound)
  int nodes = 0;       // branch-and-bound nodes whose relaxation was solved
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

struct SolveResult {
  Status status = Status::kNumericalFailure;
  VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Lower bound proven on the optimum (relaxation value, or best open node for branch-and-bound).
  double bound = -std::numeric_limits<double>::infinity();
  SolveStats stats;
  std::string message;
};

struct SolverOptions {
  double feas_tol = 1e-8;
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  /// Accept a stalled iterate as optimal when it already meets this looser tolerance.
  double accept_tol = 1e-5;
  int max_iters = 120;
  bool verbose = false;
};

/// Continuous relaxation (binaries relaxed to [0, 1]) solved by a homogeneous
/// self-dual primal-dual interior-point method with Nesterov-Todd scaling.
SolveResult solve_relaxation(const ConeProgram& prog, const SolverOptions& opts = {});

struct BranchAndBoundOptions {
  double gap_tol = 1e-6;
  double integrality_tol = 1e-6;
  int max_nodes = 100000;
  SolverOptions relaxation;
};

/// Best-first branch-and-bound over the binaries. Assignment columns are
/// branched as "fix region r" / "forbid region r" on the most fractional column
/// (ties: lowest column, then lowest region). Serial and fully deterministic.
SolveResult branch_and_bound(const ConeProgram& prog, const BranchAndBoundOptions& opts = {});

/// Returns a copy of `prog` with the given variables pinned (lower = upper = value).
ConeProgram with_fixed(const ConeProgram& prog, const std::vector<std::pair<int, double>>& fixes);

/// Constraint violations of `x`, measured outside the solver.
struct Residuals {
  double equality = 0.0;   // max |A x - b| (including assignment sums)
  double nonneg = 0.0;     // max negative part
  double soc = 0.0;        // max (||tail|| - head)+
  double psd = 0.0;        // max (-lambda_min)+
  double bounds = 0.0;
  double binary = 0.0;     // max distance to {0, 1}
  double max() const;
};

Residuals check_feasibility(const ConeProgram& prog, const VectorXd& x);

/// Writes the program in the documented "drcs-cone/1" text layout.
void dump(const ConeProgram& prog, std::ostream& out);

/// Linear expression sum(coef * x[var]) + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  static LinExpr var(int index, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }
  LinExpr& add(int index, double coef) {
    if (coef != 0.0) terms.emplace_back(index, coef);
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator*=(double s);
};

/// Incremental assembly of a ConeProgram.
class ProgramBuilder {
 public:
  int add_variable(double lower = -std::numeric_limits<double>::infinity(),
                   double upper = std::numeric_limits<double>::infinity(), bool binary = false);
  int num_vars() const { return static_cast<int>(lower_.size()); }

  void set_objective(int var, double coef);
  void add_equality(const LinExpr& lhs, double rhs);
  /// expr >= 0
  void add_nonneg(const LinExpr& expr);
  /// entries[0] >= ||entries[1:]||
  void add_soc(const std::vector<LinExpr>& entries);
  /// Symmetric dim x dim matrix given by (row, col, expr) for row <= col or any order;
  /// off-diagonal entries are mirrored.
  void add_psd(int dim, const std::vector<std::tuple<int, int, LinExpr>>& entries);
  void add_assignment_column(std::vector<int> binaries);

  ConeProgram build() const;

 private:
  using Triplets = std::vector<Eigen::Triplet<double>>;
  struct Block {
    int rows = 0;
    Triplets trip;
    std::vector<double> offset;
    void push_row(const LinExpr& e);
  };

  std::vector<double> lower_, upper_, objective_;
  std::vector<int> binaries_;
  std::vector<std::vector<int>> columns_;
  Block eq_;
  std::vector<double> eq_rhs_;
  Block nonneg_;
  std::vector<Block> soc_;
  std::vector<std::pair<int, Block>> psd_;
};

}  // namespace drcs::conic
