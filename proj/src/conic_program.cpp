#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "drcs/conic.hpp"

namespace drcs::conic {
namespace {

void check_block(const SparseRM& map, const VectorXd& offset, int n, const std::string& what) {
  if (map.cols() != n || map.rows() != offset.size())
    throw std::invalid_argument(what + ": map/offset dimensions inconsistent");
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_sparse(const SparseRM& m, std::ostream& out) {
  for (int r = 0; r < m.outerSize(); ++r)
    for (SparseRM::InnerIterator it(m, r); it; ++it)
      out << r << ' ' << it.col() << ' ' << fmt(it.value()) << '\n';
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void ConeProgram::validate() const {
  const int n = num_vars;
  if (n < 0) throw std::invalid_argument("num_vars must be nonnegative");
  if (objective.size() != n) throw std::invalid_argument("objective size != num_vars");
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bounds size != num_vars");
  for (int i = 0; i < n; ++i)
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
      throw std::invalid_argument("variable " + std::to_string(i) + " has empty bounds");
  if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != n))
    throw std::invalid_argument("equality block dimensions inconsistent");
  if (nonneg.rows() > 0) check_block(nonneg.map, nonneg.offset, n, "nonneg");
  for (const auto& b : soc) {
    if (b.rows() < 1) throw std::invalid_argument("soc block must have at least one row");
    check_block(b.map, b.offset, n, "soc");
  }
  for (const auto& b : psd) {
    if (b.dim < 1 || b.offset.size() != b.dim * b.dim)
      throw std::invalid_argument("psd block must have dim^2 rows");
    check_block(b.map, b.offset, n, "psd");
  }
  std::vector<char> is_bin(n, 0);
  for (int i : binaries) {
    if (i < 0 || i >= n) throw std::invalid_argument("binary index out of range");
    is_bin[i] = 1;
  }
  std::vector<char> used(n, 0);
  for (const auto& col : assignment_columns) {
    if (col.empty()) throw std::invalid_argument("assignment column is empty");
    for (int i : col) {
      if (i < 0 || i >= n || !is_bin[i])
        throw std::invalid_argument("assignment column entries must be binaries");
      if (used[i]) throw std::invalid_argument("binary appears in two assignment columns");
      used[i] = 1;
    }
  }
}

ConeProgram with_fixed(const ConeProgram& prog, const std::vector<std::pair<int, double>>& fixes) {
  ConeProgram out = prog;
  for (const auto& [i, v] : fixes) {
    if (i < 0 || i >= prog.num_vars) throw std::invalid_argument("with_fixed: index out of range");
    out.lower[i] = v;
    out.upper[i] = v;
  }
  return out;
}

double Residuals::max() const {
  return std::max({equality, nonneg, soc, psd, bounds, binary});
}

Residuals check_feasibility(const ConeProgram& prog, const VectorXd& x) {
  if (x.size() != prog.num_vars) throw std::invalid_argument("check_feasibility: size mismatch");
  Residuals r;
  if (prog.eq_matrix.rows() > 0)
    r.equality = (prog.eq_matrix * x - prog.eq_rhs).cwiseAbs().maxCoeff();
  for (const auto& col : prog.assignment_columns) {
    double s = 0.0;
    for (int i : col) s += x[i];
    r.equality = std::max(r.equality, std::abs(s - 1.0));
  }
  if (prog.nonneg.rows() > 0) {
    const VectorXd v = prog.nonneg.map * x + prog.nonneg.offset;
    r.nonneg = std::max(0.0, -v.minCoeff());
  }
  for (const auto& b : prog.soc) {
    const VectorXd v = b.map * x + b.offset;
    const double tail = v.size() > 1 ? v.tail(v.size() - 1).norm() : 0.0;
    r.soc = std::max(r.soc, tail - v[0]);
  }
  for (const auto& b : prog.psd) {
    const VectorXd v = b.map * x + b.offset;
    MatrixXd m = Eigen::Map<const MatrixXd>(v.data(), b.dim, b.dim);
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    r.psd = std::max(r.psd, -es.eigenvalues().minCoeff());
  }
  for (int i = 0; i < prog.num_vars; ++i)
    r.bounds = std::max({r.bounds, prog.lower[i] - x[i], x[i] - prog.upper[i]});
  for (int i : prog.binaries) r.binary = std::max(r.binary, std::min(std::abs(x[i]), std::abs(1.0 - x[i])));
  return r;
}

void dump(const ConeProgram& prog, std::ostream& out) {
  out << "drcs-cone/1\n";
  out << "vars " << prog.num_vars << '\n';
  out << "objective\n";
  for (int i = 0; i < prog.num_vars; ++i)
    if (prog.objective[i] != 0.0) out << i << ' ' << fmt(prog.objective[i]) << '\n';
  out << "end\n";
  out << "bounds\n";
  for (int i = 0; i < prog.num_vars; ++i)
    if (std::isfinite(prog.lower[i]) || std::isfinite(prog.upper[i]))
      out << i << ' ' << fmt(prog.lower[i]) << ' ' << fmt(prog.upper[i]) << '\n';
  out << "end\n";
  out << "binaries " << prog.binaries.size() << '\n';
  for (int i : prog.binaries) out << i << '\n';
  out << "columns " << prog.assignment_columns.size() << '\n';
  for (const auto& col : prog.assignment_columns) {
    out << col.size();
    for (int i : col) out << ' ' << i;
    out << '\n';
  }
  auto block = [&](const char* name, const SparseRM& map, const VectorXd& offset, int dim) {
    out << name << ' ' << offset.size();
    if (dim > 0) out << ' ' << dim;
    out << '\n';
    for (int r = 0; r < offset.size(); ++r)
      if (offset[r] != 0.0) out << "c " << r << ' ' << fmt(offset[r]) << '\n';
    write_sparse(map, out);
    out << "end\n";
  };
  block("eq", prog.eq_matrix, -prog.eq_rhs, 0);
  block("nonneg", prog.nonneg.map, prog.nonneg.offset, 0);
  for (const auto& b : prog.soc) block("soc", b.map, b.offset, 0);
  for (const auto& b : prog.psd) block("psd", b.map, b.offset, b.dim);
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

void ProgramBuilder::Block::push_row(const LinExpr& e) {
  for (const auto& [i, c] : e.terms)
    if (c != 0.0) trip.emplace_back(rows, i, c);
  offset.push_back(e.constant);
  ++rows;
}

int ProgramBuilder::add_variable(double lower, double upper, bool binary) {
  const int id = num_vars();
  if (binary) {
    lower = std::max(lower, 0.0);
    upper = std::min(upper, 1.0);
    binaries_.push_back(id);
  }
  lower_.push_back(lower);
  upper_.push_back(upper);
  objective_.push_back(0.0);
  return id;
}

void ProgramBuilder::set_objective(int var, double coef) { objective_.at(var) = coef; }

void ProgramBuilder::add_equality(const LinExpr& lhs, double rhs) {
  LinExpr e = lhs;
  e.constant = 0.0;
  eq_.push_row(e);
  eq_rhs_.push_back(rhs - lhs.constant);
}

void ProgramBuilder::add_nonneg(const LinExpr& expr) { nonneg_.push_row(expr); }

void ProgramBuilder::add_soc(const std::vector<LinExpr>& entries) {
  if (entries.empty()) throw std::invalid_argument("add_soc: empty cone");
  Block b;
  for (const auto& e : entries) b.push_row(e);
  soc_.push_back(std::move(b));
}

void ProgramBuilder::add_psd(int dim, const std::vector<std::tuple<int, int, LinExpr>>& entries) {
  if (dim < 1) throw std::invalid_argument("add_psd: dim must be positive");
  std::vector<LinExpr> cells(static_cast<std::size_t>(dim) * dim);
  for (const auto& [r, c, e] : entries) {
    if (r < 0 || c < 0 || r >= dim || c >= dim) throw std::invalid_argument("add_psd: index out of range");
    cells[r + c * dim] += e;
    if (r != c) cells[c + r * dim] += e;
  }
  Block b;
  for (const auto& e : cells) b.push_row(e);
  psd_.emplace_back(dim, std::move(b));
}

void ProgramBuilder::add_assignment_column(std::vector<int> binaries) {
  columns_.push_back(std::move(binaries));
}

ConeProgram ProgramBuilder::build() const {
  const int n = num_vars();
  auto to_map = [n](const Block& b) {
    SparseRM m(b.rows, n);
    m.setFromTriplets(b.trip.begin(), b.trip.end());
    m.makeCompressed();
    return m;
  };
  auto to_vec = [](const std::vector<double>& v) {
    return VectorXd(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  ConeProgram p;
  p.num_vars = n;
  p.objective = to_vec(objective_);
  p.lower = to_vec(lower_);
  p.upper = to_vec(upper_);
  p.eq_matrix = to_map(eq_);
  p.eq_rhs = to_vec(eq_rhs_);
  p.nonneg = {to_map(nonneg_), to_vec(nonneg_.offset)};
  for (const auto& b : soc_) p.soc.push_back({to_map(b), to_vec(b.offset)});
  for (const auto& [dim, b] : psd_) p.psd.push_back({dim, to_map(b), to_vec(b.offset)});
  p.binaries = binaries_;
  p.assignment_columns = columns_;
  p.validate();
  return p;
}

}  // namespace drcs::conic
