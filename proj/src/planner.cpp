#include "drcs/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "drcs/risk.hpp"

namespace drcs {
namespace {

using conic::LinExpr;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Certified rows are tightened by this much so margins recomputed outside the solver stay <= 0.
constexpr double kBackoff = 1e-5;
constexpr double kFallbackBigM = 1e4;

bool is_pd(const MatrixXd& m) {
  return m.rows() == m.cols() && m.rows() > 0 && is_symmetric_psd(m) && min_eigenvalue(m) > 0.0;
}

// Unit normals up to sign; faces sharing a direction share the covariance bound.
struct Directions {
  std::vector<VectorXd> unit;
  std::vector<std::vector<int>> of_face;  // [region][face]
};

Directions collect_directions(const SafeSet& set) {
  Directions d;
  for (const auto& r : set.regions) {
    std::vector<int> idx;
    for (const auto& f : r.faces) {
      VectorXd u = f.c / f.c.norm();
      int lead = 0;
      while (lead < u.size() && std::abs(u[lead]) < 1e-12) ++lead;
      if (u[lead] < 0.0) u = -u;
      int found = -1;
      for (std::size_t i = 0; i < d.unit.size(); ++i)
        if ((d.unit[i] - u).lpNorm<Eigen::Infinity>() < 1e-12) found = static_cast<int>(i);
      if (found < 0) {
        found = static_cast<int>(d.unit.size());
        d.unit.push_back(u);
      }
      idx.push_back(found);
    }
    d.of_face.push_back(std::move(idx));
  }
  return d;
}

// Affine expressions for the planned mean mu_e and deviation factor F_e (x_e - mu_e = F_e [xi0; w]).
class Expressions {
 public:
  Expressions(const DiscreteModel& dm, const NoiseChannels& ch, const VectorXd& mu0, const PlannerLayout& lay)
      : ch_(ch), lay_(lay), n_(dm.n()), m_(dm.m()) {
    const int kp = dm.k_prime;
    std::vector<MatrixXd> pw(kp + 1);
    pw[0] = MatrixXd::Identity(n_, n_);
    for (int p = 1; p <= kp; ++p) pw[p] = dm.transition * pw[p - 1];
    MatrixXd noise(n_, ch.n_wj());
    for (int j = 0; j < ch.n_wj(); ++j) noise.col(j) = dm.noise.col(ch.w_cols[j]) * std::sqrt(dm.delta_t);
    for (int p = 0; p <= kp; ++p) {
      pmu_.push_back(pw[p] * mu0);
      pe0_.push_back(pw[p] * ch.e0);
      pn_.push_back(pw[p] * noise);
      pb_.push_back(pw[p] * dm.input);
    }
  }

  LinExpr mean(int e, int r) const {
    LinExpr x(pmu_[e][r]);
    for (int i = 0; i < e; ++i)
      for (int a = 0; a < m_; ++a) x.add(lay_.v[i][a], pb_[e - 1 - i](r, a));
    return x;
  }

  LinExpr factor(int e, int r, int c) const {
    LinExpr x;
    const int r0 = ch_.r0(), nw = ch_.n_wj();
    if (c < r0) {
      x.constant = pe0_[e](r, c);
    } else {
      const int i = (c - r0) / nw, j = (c - r0) % nw;
      if (i < e) x.constant = pn_[e - 1 - i](r, j);
    }
    for (int i = 0; i < e; ++i) {
      const int w = ch_.width(i);
      if (c >= w) continue;
      for (int a = 0; a < m_; ++a) x.add(lay_.k[i][a * w + c], pb_[e - 1 - i](r, a));
    }
    return x;
  }

  double e0_surd(const VectorXd& u) const { return (ch_.e0.transpose() * u).norm(); }

 private:
  const NoiseChannels& ch_;
  const PlannerLayout& lay_;
  int n_, m_;
  std::vector<VectorXd> pmu_;
  std::vector<MatrixXd> pe0_, pn_, pb_;
};

// sum_s w[s] * exprs[s]
LinExpr combine(const Eigen::Ref<const Eigen::RowVectorXd>& w, const std::vector<LinExpr>& exprs) {
  LinExpr out;
  for (int s = 0; s < w.size(); ++s) {
    if (w[s] == 0.0) continue;
    LinExpr t = exprs[s];
    t *= w[s];
    out += t;
  }
  return out;
}

double max_over_box(const VectorXd& c, const VectorXd& lo, const VectorXd& hi) {
  double s = 0.0;
  for (int i = 0; i < c.size(); ++i) s += c[i] > 0.0 ? c[i] * hi[i] : c[i] * lo[i];
  return s;
}

// max over the region of d - c'z (infinite if the region is unbounded in direction -c).
double face_slack(const ConvexRegion& region, const HalfSpace& face) {
  const int n = region.dim();
  conic::ProgramBuilder pb;
  std::vector<int> z(n);
  for (auto& v : z) v = pb.add_variable();
  for (int i = 0; i < n; ++i) pb.set_objective(z[i], face.c[i]);
  for (const auto& f : region.faces) {
    LinExpr e(f.d);
    for (int i = 0; i < n; ++i) e.add(z[i], -f.c[i]);
    pb.add_nonneg(e);
  }
  const auto r = conic::solve_relaxation(pb.build());
  if (r.status == conic::Status::kOptimal) return face.d - r.objective;
  return r.status == conic::Status::kUnbounded ? kInf : -kInf;
}

std::string infeasibility_diagnostic(const PlannerProblem& p) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t j = 0; j < p.safe_set.regions.size(); ++j) {
    const auto& region = p.safe_set.regions[j];
    const auto risks = face_risks(region, p.delta_s);
    int worst = 0;
    double worst_gap = -kInf, worst_term = 0.0, worst_slack = 0.0;
    for (std::size_t l = 0; l < region.faces.size(); ++l) {
      const auto& f = region.faces[l];
      const double term = f.c.norm() * p.rho / std::sqrt(risks[l]);
      const double slack = face_slack(region, f);
      if (term - slack > worst_gap) {
        worst_gap = term - slack;
        worst = static_cast<int>(l);
        worst_term = term;
        worst_slack = slack;
      }
    }
    int worst0 = 0;
    double m0 = -kInf;
    for (std::size_t l = 0; l < region.faces.size(); ++l) {
      const auto& f = region.faces[l];
      const double v = dr_cvar_halfspace(f.c, f.d, p.boundary.mu0, p.boundary.sigma0, risks[l], p.rho);
      if (v > m0) {
        m0 = v;
        worst0 = static_cast<int>(l);
      }
    }
    out << "region " << j << ": ";
    if (worst_gap > 0.0)
      out << "face " << worst << " cannot be certified anywhere (radius term " << worst_term
          << " exceeds the largest face slack " << worst_slack << ")";
    else
      out << "geometry admits the radius term";
    out << "; at the initial moments face " << worst0 << " has DR-CVaR " << m0 << "\n";
  }
  return out.str();
}

}  // namespace

void BoundaryConditions::validate(int n) const {
  if (mu0.size() != n || mu_t.size() != n) throw std::invalid_argument("boundary means must be n-vectors");
  if (sigma0.rows() != n || sigma0.cols() != n || sigma_t.rows() != n || sigma_t.cols() != n)
    throw std::invalid_argument("boundary covariances must be n x n");
  if (!is_symmetric_psd(sigma0)) throw std::invalid_argument("sigma0 must be symmetric positive semidefinite");
  if (!is_symmetric_psd(sigma_t)) throw std::invalid_argument("sigma_T must be symmetric positive semidefinite");
}

NoiseChannels NoiseChannels::build(const DiscreteModel& dm, const MatrixXd& sigma0) {
  NoiseChannels ch;
  const MatrixXd sym = 0.5 * (sigma0 + sigma0.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  const VectorXd lam = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, lam.size() ? lam.maxCoeff() : 0.0);
  std::vector<int> keep;
  for (int i = static_cast<int>(lam.size()) - 1; i >= 0; --i)
    if (lam[i] > tol) keep.push_back(i);
  ch.e0.resize(sym.rows(), static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    VectorXd vec = es.eigenvectors().col(keep[c]);
    int lead = 0;
    while (lead < vec.size() && std::abs(vec[lead]) < 1e-12) ++lead;
    if (vec[lead] < 0.0) vec = -vec;  // fixed sign so plans do not depend on the eigensolver
    ch.e0.col(static_cast<int>(c)) = vec * std::sqrt(lam[keep[c]]);
  }
  for (int j = 0; j < dm.n_w(); ++j)
    if (dm.noise.col(j).norm() > 0.0) ch.w_cols.push_back(j);
  return ch;
}

void PlannerProblem::validate() const {
  const int n = dm.n(), m = dm.m();
  if (dm.k_prime < 1 || !(dm.delta_t > 0.0)) throw std::invalid_argument("planner needs a valid discrete model");
  if (q.rows() != n || !is_pd(q)) throw std::invalid_argument("state weight Q must be n x n positive definite");
  if (q_terminal.size() && (q_terminal.rows() != n || !is_pd(q_terminal)))
    throw std::invalid_argument("terminal weight must be n x n positive definite");
  if (r.rows() != m || !is_pd(r)) throw std::invalid_argument("input weight R must be m x m positive definite");
  boundary.validate(n);
  if (!(delta_s > 0.0 && delta_s < 1.0)) throw std::invalid_argument("delta_s must lie in (0, 1)");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be finite and nonnegative");
  if (!(big_m >= 0.0)) throw std::invalid_argument("big_m must be nonnegative");
  if (enforce_safety) {
    drcs::validate(safe_set);
    if (safe_set.dim() != n) throw std::invalid_argument("safe set dimension must equal the state dimension");
  }
}

Moments propagate_moments(const LiftedModel& lifted, const NoiseChannels& ch, const PlannerDecision& d,
                          const BoundaryConditions& b, double delta_t) {
  const int n = lifted.n, m = lifted.m, kp = lifted.k_prime, w = ch.width(kp);
  if (static_cast<int>(d.v.size()) != kp || static_cast<int>(d.k.size()) != kp)
    throw std::invalid_argument("propagate_moments: decision length must equal the horizon");
  VectorXd vs(m * kp);
  MatrixXd ks = MatrixXd::Zero(m * kp, w);
  for (int k = 0; k < kp; ++k) {
    if (d.v[k].size() != m || d.k[k].rows() != m || d.k[k].cols() != ch.width(k))
      throw std::invalid_argument("propagate_moments: gain shapes do not match the noise channels");
    vs.segment(k * m, m) = d.v[k];
    ks.block(k * m, 0, m, ch.width(k)) = d.k[k];
  }
  MatrixXd dev(n * kp, w);
  dev.leftCols(ch.r0()) = lifted.cal_a_mu * ch.e0;
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < ch.n_wj(); ++j)
      dev.col(ch.r0() + i * ch.n_wj() + j) = lifted.cal_a_sigma.col(i * lifted.n_w + ch.w_cols[j]) * std::sqrt(delta_t);
  dev += lifted.b_hat * ks;
  const VectorXd mean = lifted.cal_a_mu * b.mu0 + lifted.b_hat * vs;

  Moments out;
  out.mean.push_back(b.mu0);
  out.cov.push_back(b.sigma0);
  for (int e = 1; e <= kp; ++e) {
    out.mean.push_back(mean.segment((e - 1) * n, n));
    const auto blk = dev.middleRows((e - 1) * n, n);
    out.cov.push_back(blk * blk.transpose());
  }
  return out;
}

double expected_cost(const PlannerProblem& p, const Moments& mo, const PlannerDecision& d) {
  const int kp = p.dm.k_prime;
  double s = 0.0;
  for (int e = 1; e <= kp; ++e) {
    const MatrixXd& q = (e == kp && p.q_terminal.size()) ? p.q_terminal : p.q;
    s += (q * mo.cov[e]).trace() + mo.mean[e].dot(q * mo.mean[e]);
  }
  for (int k = 0; k < kp; ++k) s += d.v[k].dot(p.r * d.v[k]) + (p.r * d.k[k] * d.k[k].transpose()).trace();
  return s;
}

Assembly assemble(const PlannerProblem& p, const std::vector<std::vector<double>>& big_m) {
  p.validate();
  const auto& dm = p.dm;
  const int n = dm.n(), m = dm.m(), kp = dm.k_prime;
  Assembly as;
  as.channels = NoiseChannels::build(dm, p.boundary.sigma0);
  const NoiseChannels& ch = as.channels;
  PlannerLayout& lay = as.layout;
  conic::ProgramBuilder pb;

  lay.v.resize(kp);
  lay.k.resize(kp);
  for (int k = 0; k < kp; ++k) {
    for (int a = 0; a < m; ++a) lay.v[k].push_back(pb.add_variable());
    for (int i = 0; i < m * ch.width(k); ++i) lay.k[k].push_back(pb.add_variable());
  }
  lay.cost = pb.add_variable(0.0, kInf);
  pb.set_objective(lay.cost, 1.0);
  const Expressions ex(dm, ch, p.boundary.mu0, lay);

  // cost >= |y| with E[J] = |y|^2; minimizing the norm has the same minimizers and keeps the cone well scaled.
  {
    const MatrixXd qh = sym_sqrt(p.q), qth = sym_sqrt(p.q_terminal.size() ? p.q_terminal : p.q), rh = sym_sqrt(p.r);
    std::vector<LinExpr> cone{LinExpr::var(lay.cost)};
    auto push = [&](const MatrixXd& w, const std::vector<LinExpr>& col) {
      for (int r = 0; r < w.rows(); ++r) cone.push_back(combine(w.row(r), col));
    };
    std::vector<LinExpr> col(n);
    for (int e = 1; e <= kp; ++e) {
      const MatrixXd& w = e == kp ? qth : qh;
      for (int r = 0; r < n; ++r) col[r] = ex.mean(e, r);
      push(w, col);
      for (int c = 0; c < ch.width(e); ++c) {
        for (int r = 0; r < n; ++r) col[r] = ex.factor(e, r, c);
        push(w, col);
      }
    }
    std::vector<LinExpr> ucol(m);
    for (int k = 0; k < kp; ++k) {
      for (int a = 0; a < m; ++a) ucol[a] = LinExpr::var(lay.v[k][a]);
      push(rh, ucol);
      const int w = ch.width(k);
      for (int c = 0; c < w; ++c) {
        for (int a = 0; a < m; ++a) ucol[a] = LinExpr::var(lay.k[k][a * w + c]);
        push(rh, ucol);
      }
    }
    pb.add_soc(cone);
  }

  // Terminal mean and covariance (Sigma_T - F F' >= 0 via its Schur complement).
  for (int r = 0; r < n; ++r) pb.add_equality(ex.mean(kp, r), p.boundary.mu_t[r]);
  {
    const int w = ch.width(kp);
    std::vector<std::tuple<int, int, LinExpr>> cells;
    for (int r = 0; r < n; ++r)
      for (int s = r; s < n; ++s) cells.emplace_back(r, s, LinExpr(p.boundary.sigma_t(r, s)));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < w; ++c) cells.emplace_back(r, n + c, ex.factor(kp, r, c));
    for (int c = 0; c < w; ++c) cells.emplace_back(n + c, n + c, LinExpr(1.0));
    pb.add_psd(n + w, cells);
  }

  if (p.enforce_safety) {
    const auto& regions = p.safe_set.regions;
    const int no = static_cast<int>(regions.size());
    lay.o.assign(no, {});
    for (int j = 0; j < no; ++j)
      for (int k = 0; k < kp; ++k) lay.o[j].push_back(pb.add_variable(0.0, 1.0, true));
    for (int k = 0; k < kp; ++k) {
      std::vector<int> column;
      for (int j = 0; j < no; ++j) column.push_back(lay.o[j][k]);
      pb.add_assignment_column(std::move(column));
    }

    const Directions dirs = collect_directions(p.safe_set);
    // tau[d][e] >= |F_e' u_d| for e >= 1
    std::vector<std::vector<int>> tau(dirs.unit.size());
    for (std::size_t d = 0; d < dirs.unit.size(); ++d) {
      tau[d].push_back(-1);
      for (int e = 1; e <= kp; ++e) {
        const int t = pb.add_variable(0.0, kInf);
        tau[d].push_back(t);
        std::vector<LinExpr> cone{LinExpr::var(t)};
        std::vector<LinExpr> col(n);
        for (int c = 0; c < ch.width(e); ++c) {
          for (int r = 0; r < n; ++r) col[r] = ex.factor(e, r, c);
          cone.push_back(combine(dirs.unit[d].transpose(), col));
        }
        pb.add_soc(cone);
      }
    }

    for (int j = 0; j < no; ++j) {
      const auto& region = regions[j];
      const auto risks = face_risks(region, p.delta_s);
      for (std::size_t l = 0; l < region.faces.size(); ++l) {
        const auto& f = region.faces[l];
        const double mval = big_m.empty() ? (p.big_m > 0.0 ? p.big_m : kFallbackBigM) : big_m[j][l];
        const double kappa = cvar_coefficient(risks[l]), nc = f.c.norm();
        const int d = dirs.of_face[j][l];
        for (int k = 0; k < kp; ++k) {
          for (int e : {k, k + 1}) {
            // M (1 - O_jk) - (c'mu_e - d) - kappa |c| |F_e' u| - |c| rho / sqrt(f) >= 0
            LinExpr row(mval + f.d - nc * p.rho / std::sqrt(risks[l]) - kBackoff);
            row.add(lay.o[j][k], -mval);
            std::vector<LinExpr> mu(n);
            for (int r = 0; r < n; ++r) mu[r] = ex.mean(e, r);
            LinExpr cmu = combine(f.c.transpose(), mu);
            cmu *= -1.0;
            row += cmu;
            if (e == 0)
              row.constant -= kappa * nc * ex.e0_surd(dirs.unit[d]);
            else
              row.add(tau[d][e], -kappa * nc);
            pb.add_nonneg(row);
            ++lay.safety_rows;
          }
        }
      }
    }
  }
  as.program = pb.build();
  return as;
}

PlannerDecision extract_decision(const Assembly& as, const VectorXd& x, int m) {
  PlannerDecision d;
  const auto& lay = as.layout;
  const int kp = static_cast<int>(lay.v.size());
  for (int k = 0; k < kp; ++k) {
    VectorXd v(m);
    for (int a = 0; a < m; ++a) v[a] = x[lay.v[k][a]];
    d.v.push_back(v);
    const int w = as.channels.width(k);
    MatrixXd g(m, w);
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < w; ++c) g(a, c) = x[lay.k[k][a * w + c]];
    d.k.push_back(g);
    int best = 0;
    for (std::size_t j = 0; j < lay.o.size(); ++j)
      if (x[lay.o[j][k]] > x[lay.o[best][k]]) best = static_cast<int>(j);
    d.region.push_back(best);
  }
  return d;
}

PlannerSolution solve(const PlannerProblem& p) {
  p.validate();
  const int m = p.dm.m(), kp = p.dm.k_prime;
  const LiftedModel lifted = build_lifted(p.dm);
  PlannerSolution sol;
  const bool safety = p.enforce_safety;

  auto finish = [&](const Assembly& as, const conic::SolveResult& res) {
    sol.status = res.status;
    sol.stats = res.stats;
    sol.channels = as.channels;
    if (!res.message.empty()) sol.message = res.message;
    if (res.status != conic::Status::kOptimal) return;
    sol.decision = extract_decision(as, res.x, m);
    sol.moments = propagate_moments(lifted, as.channels, sol.decision, p.boundary, p.dm.delta_t);
    sol.objective = expected_cost(p, sol.moments, sol.decision);
    sol.solver_objective = res.x[as.layout.cost] * res.x[as.layout.cost];
  };

  PlannerProblem reference = p;
  reference.enforce_safety = false;
  const Assembly ref_as = assemble(reference);
  const auto ref = conic::solve_relaxation(ref_as.program, p.bnb.relaxation);
  if (!safety || ref.status != conic::Status::kOptimal) {
    finish(ref_as, ref);
    if (ref.status == conic::Status::kInfeasible)
      sol.diagnostic = "terminal moments are unreachable even without safety constraints\n";
    return sol;
  }

  // Per-face Big-M from the safety-free plan: reachable-mean box widened by its own span.
  const Moments ref_mo =
      propagate_moments(lifted, ref_as.channels, extract_decision(ref_as, ref.x, m), p.boundary, p.dm.delta_t);
  VectorXd lo = ref_mo.mean[0], hi = ref_mo.mean[0];
  for (const auto& mu : ref_mo.mean) {
    lo = lo.cwiseMin(mu);
    hi = hi.cwiseMax(mu);
  }
  const VectorXd span = (hi - lo).array() + 1.0;
  lo -= span;
  hi += span;
  const auto& regions = p.safe_set.regions;
  std::vector<std::vector<double>> big_m(regions.size());
  for (std::size_t j = 0; j < regions.size(); ++j) {
    const auto risks = face_risks(regions[j], p.delta_s);
    for (std::size_t l = 0; l < regions[j].faces.size(); ++l) {
      const auto& f = regions[j].faces[l];
      double surd = 0.0;
      for (const auto& s : ref_mo.cov) surd = std::max(surd, std::sqrt(std::max(0.0, f.c.dot(s * f.c))));
      const double val = max_over_box(f.c, lo, hi) - f.d + cvar_coefficient(risks[l]) * 2.0 * surd +
                         f.c.norm() * p.rho / std::sqrt(risks[l]) + 10.0;
      big_m[j].push_back(p.big_m > 0.0 ? p.big_m : std::max(10.0, val));
    }
  }

  constexpr int kMaxDoublings = 4;
  for (int attempt = 0;; ++attempt) {
    const Assembly as = assemble(p, big_m);
    // The program minimizes sqrt(E[J]); half the relative gap on it bounds the gap on E[J].
    conic::BranchAndBoundOptions bnb = p.bnb;
    bnb.gap_tol = 0.5 * p.bnb.gap_tol;
    const auto res = conic::branch_and_bound(as.program, bnb);
    sol.big_m = big_m;
    finish(as, res);
    if (res.status != conic::Status::kOptimal) break;
    // An inactive row whose left side reaches half of M may have cut off better plans.
    bool tight = false;
    for (int k = 0; k < kp; ++k)
      for (std::size_t j = 0; j < regions.size(); ++j) {
        if (static_cast<int>(j) == sol.decision.region[k]) continue;
        const auto risks = face_risks(regions[j], p.delta_s);
        for (std::size_t l = 0; l < regions[j].faces.size(); ++l) {
          const auto& f = regions[j].faces[l];
          for (int e : {k, k + 1}) {
            const double v = dr_cvar_halfspace(f.c, f.d, sol.moments.mean[e], sol.moments.cov[e], risks[l], p.rho);
            if (v > 0.5 * big_m[j][l]) {
              big_m[j][l] *= 2.0;
              tight = true;
            }
          }
        }
      }
    if (!tight) break;
    if (attempt == kMaxDoublings) {
      sol.message += (sol.message.empty() ? "" : "; ") + std::string("Big-M still near-binding after doubling");
      break;
    }
  }
  if (sol.status == conic::Status::kInfeasible) {
    sol.diagnostic = infeasibility_diagnostic(p);
    return sol;
  }
  if (sol.status != conic::Status::kOptimal) return sol;

  sol.max_margin = -kInf;
  for (int k = 0; k < kp; ++k) {
    const int j = sol.decision.region[k];
    const auto risks = face_risks(regions[j], p.delta_s);
    for (std::size_t l = 0; l < regions[j].faces.size(); ++l) {
      const auto& f = regions[j].faces[l];
      for (int e : {k, k + 1}) {
        FaceMargin fm{j, static_cast<int>(l), k, e,
                      dr_cvar_halfspace(f.c, f.d, sol.moments.mean[e], sol.moments.cov[e], risks[l], p.rho)};
        sol.max_margin = std::max(sol.max_margin, fm.value);
        sol.margins.push_back(fm);
      }
    }
  }
  return sol;
}

VectorXd Schedule::input(int step, const VectorXd& xi0, const std::vector<VectorXd>& w) const {
  if (step < 0 || step >= k_prime()) throw std::out_of_range("schedule step outside the horizon");
  VectorXd z(channels.width(step));
  z.head(channels.r0()) = xi0;
  for (int i = 0; i < step; ++i) z.segment(channels.r0() + i * channels.n_wj(), channels.n_wj()) = w[i];
  return v[step] + k[step] * z;
}

Schedule extract_schedule(const PlannerSolution& sol, const DiscreteModel& dm) {
  if (sol.status != conic::Status::kOptimal) throw std::invalid_argument("extract_schedule: solution is not optimal");
  Schedule s;
  s.delta_t = dm.delta_t;
  s.channels = sol.channels;
  s.v = sol.decision.v;
  s.k = sol.decision.k;
  return s;
}

}  // namespace drcs
