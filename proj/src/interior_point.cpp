// Homogeneous self-dual interior-point method for
//
//   minimize c'x  s.t.  A x = b,  G x + s = h,  s in K
//
// with K a product of nonnegative orthants, second-order cones and PSD cones
// (full column-major vectorization). Nesterov-Todd scaling, Mehrotra
// predictor-corrector, KKT systems reduced to dense normal equations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "conic_internal.hpp"
#include "drcs/errors.hpp"

namespace drcs::conic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using SparseCM = Eigen::SparseMatrix<double>;

struct Layout {
  int l = 0;
  std::vector<int> q, q_off;
  std::vector<int> s, s_off;
  int rows = 0;
  int degree = 0;

  void finalize() {
    int off = l;
    degree = l;
    q_off.clear();
    s_off.clear();
    for (int d : q) {
      q_off.push_back(off);
      off += d;
      degree += 1;
    }
    for (int d : s) {
      s_off.push_back(off);
      off += d * d;
      degree += d;
    }
    rows = off;
  }
};

struct Standard {
  int n = 0;
  VectorXd c;
  SparseRM a;
  VectorXd b;
  SparseRM g;
  VectorXd h;
  Layout lay;
};

inline Eigen::Map<const MatrixXd> as_mat(const VectorXd& v, int off, int d) {
  return Eigen::Map<const MatrixXd>(v.data() + off, d, d);
}
inline Eigen::Map<MatrixXd> as_mat(VectorXd& v, int off, int d) {
  return Eigen::Map<MatrixXd>(v.data() + off, d, d);
}

// ---------------------------------------------------------------- cone algebra

VectorXd identity(const Layout& lay) {
  VectorXd e = VectorXd::Zero(lay.rows);
  e.head(lay.l).setOnes();
  for (int off : lay.q_off) e[off] = 1.0;
  for (std::size_t k = 0; k < lay.s.size(); ++k) as_mat(e, lay.s_off[k], lay.s[k]).diagonal().setOnes();
  return e;
}

// Smallest t with x + t e in K (negative when x is interior).
double boundary_shift(const Layout& lay, const VectorXd& x) {
  double t = -kInf;
  if (lay.l > 0) t = std::max(t, -x.head(lay.l).minCoeff());
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    t = std::max(t, x.segment(off + 1, d - 1).norm() - x[off]);
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const MatrixXd m = as_mat(x, lay.s_off[k], lay.s[k]);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    t = std::max(t, -es.eigenvalues()[0]);
  }
  return t;
}

// Largest alpha with x + alpha dx in K, for x interior. Returns +inf if unbounded.
double max_step(const Layout& lay, const VectorXd& x, const VectorXd& dx) {
  double alpha = kInf;
  for (int i = 0; i < lay.l; ++i)
    if (dx[i] < 0.0) alpha = std::min(alpha, -x[i] / dx[i]);
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    const double x0 = x[off], d0 = dx[off];
    const auto x1 = x.segment(off + 1, d - 1);
    const auto d1 = dx.segment(off + 1, d - 1);
    const double qa = d0 * d0 - d1.squaredNorm();
    const double qb = x0 * d0 - x1.dot(d1);
    const double qc = std::max(x0 * x0 - x1.squaredNorm(), 0.0);
    double root = kInf;
    if (qa == 0.0) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else {
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -(qb + (qb >= 0.0 ? sq : -sq));
        for (double r : {qq / qa, qq != 0.0 ? qc / qq : kInf})
          if (r > 0.0) root = std::min(root, r);
      }
    }
    alpha = std::min(alpha, root);
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    MatrixXd xm = as_mat(x, off, d);
    xm = 0.5 * (xm + xm.transpose()).eval();
    Eigen::LLT<MatrixXd> llt(xm);
    if (llt.info() != Eigen::Success) return 0.0;
    MatrixXd dm = as_mat(dx, off, d);
    dm = 0.5 * (dm + dm.transpose()).eval();
    MatrixXd m = llt.matrixL().solve(dm);
    m = llt.matrixL().solve(m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()[0];
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

struct Scaling {
  VectorXd d;  // orthant: W = diag(d)
  std::vector<double> beta;
  std::vector<VectorXd> v;  // SOC: W = beta (2 v v' - J), v' J v = 1
  std::vector<MatrixXd> r, rti;  // PSD: W(U) = r' U r, rti = r^{-T}
  VectorXd lambda;
  std::vector<VectorXd> lam_psd;
};

Scaling identity_scaling(const Layout& lay) {
  Scaling w;
  w.d = VectorXd::Ones(lay.l);
  for (int d : lay.q) {
    w.beta.push_back(1.0);
    VectorXd v = VectorXd::Zero(d);
    v[0] = 1.0;
    w.v.push_back(v);
  }
  for (int d : lay.s) {
    w.r.push_back(MatrixXd::Identity(d, d));
    w.rti.push_back(MatrixXd::Identity(d, d));
  }
  return w;
}

double soc_det_sqrt(const VectorXd& x, int off, int d) {
  const double t = x.segment(off + 1, d - 1).norm();
  const double p = (x[off] - t) * (x[off] + t);
  if (!(p > 0.0) || x[off] <= 0.0) throw NumericalError("iterate left the second-order cone");
  return std::sqrt(p);
}

Scaling nt_scaling(const Layout& lay, const VectorXd& s, const VectorXd& z) {
  Scaling w;
  w.lambda = VectorXd::Zero(lay.rows);
  w.d.resize(lay.l);
  for (int i = 0; i < lay.l; ++i) {
    if (!(s[i] > 0.0) || !(z[i] > 0.0)) throw NumericalError("iterate left the orthant");
    w.d[i] = std::sqrt(s[i] / z[i]);
    w.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    const double aa = soc_det_sqrt(s, off, d), bb = soc_det_sqrt(z, off, d);
    const VectorXd sb = s.segment(off, d) / aa;
    const VectorXd zb = z.segment(off, d) / bb;
    const double cc = std::sqrt((sb.dot(zb) + 1.0) / 2.0);
    VectorXd wb(d);
    wb[0] = (sb[0] + zb[0]) / (2.0 * cc);
    wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * cc);
    VectorXd v = wb;
    v[0] += 1.0;
    v /= std::sqrt(2.0 * (wb[0] + 1.0));
    w.beta.push_back(std::sqrt(aa / bb));
    w.v.push_back(v);
    const double dd = 2.0 * cc + sb[0] + zb[0];
    auto lam = w.lambda.segment(off, d);
    lam[0] = cc;
    lam.tail(d - 1) = sb.tail(d - 1) * ((cc + zb[0]) / dd) + zb.tail(d - 1) * ((cc + sb[0]) / dd);
    lam *= std::sqrt(aa * bb);
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    MatrixXd sm = as_mat(s, off, d), zm = as_mat(z, off, d);
    Eigen::LLT<MatrixXd> ls(0.5 * (sm + sm.transpose())), lz(0.5 * (zm + zm.transpose()));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
      throw NumericalError("iterate left the semidefinite cone");
    const MatrixXd lsm = ls.matrixL(), lzm = lz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sig = svd.singularValues();
    if (!(sig.minCoeff() > 0.0)) throw NumericalError("degenerate semidefinite scaling");
    const VectorXd isq = sig.cwiseSqrt().cwiseInverse();
    w.r.push_back(lsm * svd.matrixV() * isq.asDiagonal());
    w.rti.push_back(lzm * svd.matrixU() * isq.asDiagonal());
    as_mat(w.lambda, off, d).diagonal() = sig;
    w.lam_psd.push_back(sig);
  }
  return w;
}

enum class Op { kW, kWT, kWinv, kWinvT };

VectorXd apply(const Layout& lay, const Scaling& w, Op op, const VectorXd& u) {
  VectorXd out(u.size());
  const bool inv = (op == Op::kWinv || op == Op::kWinvT);
  for (int i = 0; i < lay.l; ++i) out[i] = inv ? u[i] / w.d[i] : u[i] * w.d[i];
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    const auto uk = u.segment(off, d);
    const VectorXd& v = w.v[k];
    auto ok = out.segment(off, d);
    if (!inv) {
      // beta (2 v v'u - J u)
      const double vu = v.dot(uk);
      ok = 2.0 * vu * v;
      ok[0] -= uk[0];
      ok.tail(d - 1) += uk.tail(d - 1);
      ok *= w.beta[k];
    } else {
      // (1/beta) (2 J v (v' J u) - J u)
      const double vju = v[0] * uk[0] - v.tail(d - 1).dot(uk.tail(d - 1));
      ok[0] = 2.0 * v[0] * vju - uk[0];
      ok.tail(d - 1) = -2.0 * v.tail(d - 1) * vju + uk.tail(d - 1);
      ok /= w.beta[k];
    }
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    const auto um = as_mat(u, off, d);
    auto om = as_mat(out, off, d);
    switch (op) {
      case Op::kW: om = w.r[k].transpose() * um * w.r[k]; break;
      case Op::kWT: om = w.r[k] * um * w.r[k].transpose(); break;
      case Op::kWinv: om = w.rti[k] * um * w.rti[k].transpose(); break;
      case Op::kWinvT: om = w.rti[k].transpose() * um * w.rti[k]; break;
    }
  }
  return out;
}

VectorXd jordan(const Layout& lay, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out.head(lay.l) = u.head(lay.l).cwiseProduct(v.head(lay.l));
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    out[off] = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) + v[off] * u.segment(off + 1, d - 1);
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    const MatrixXd p = as_mat(u, off, d) * as_mat(v, off, d);
    as_mat(out, off, d) = 0.5 * (p + p.transpose());
  }
  return out;
}

// Solves lambda o x = rhs.
VectorXd jordan_div(const Layout& lay, const Scaling& w, const VectorXd& rhs) {
  const VectorXd& lam = w.lambda;
  VectorXd out(rhs.size());
  out.head(lay.l) = rhs.head(lay.l).cwiseQuotient(lam.head(lay.l));
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    const double l0 = lam[off];
    const auto l1 = lam.segment(off + 1, d - 1);
    const double aa = l0 * l0 - l1.squaredNorm();
    const double u0 = (l0 * rhs[off] - l1.dot(rhs.segment(off + 1, d - 1))) / aa;
    out[off] = u0;
    out.segment(off + 1, d - 1) = (rhs.segment(off + 1, d - 1) - u0 * l1) / l0;
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    const VectorXd& sig = w.lam_psd[k];
    const auto rm = as_mat(rhs, off, d);
    auto om = as_mat(out, off, d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) om(i, j) = 2.0 * rm(i, j) / (sig[i] + sig[j]);
  }
  return out;
}

// ------------------------------------------------------------- KKT machinery

// Column structure of G reused across iterations.
struct Structure {
  // Orthant rows of G as (col, value) lists.
  std::vector<std::vector<std::pair<int, double>>> lp_rows;
  // Per SOC block: its rows of G and the constant lower triangle of G_k' G_k.
  std::vector<SparseRM> soc_rows;
  std::vector<SparseCM> soc_gtg;
  // Per PSD block: support columns and, for each, its (row, col, value) entries.
  struct PsdCol {
    int var;
    std::vector<std::tuple<int, int, double>> entries;
  };
  std::vector<std::vector<PsdCol>> psd_cols;
};

Structure analyze(const Standard& sf) {
  Structure st;
  const Layout& lay = sf.lay;
  st.lp_rows.resize(lay.l);
  for (int r = 0; r < lay.l; ++r)
    for (SparseRM::InnerIterator it(sf.g, r); it; ++it) st.lp_rows[r].emplace_back(it.col(), it.value());
  for (std::size_t k = 0; k < lay.q.size(); ++k) {
    const int off = lay.q_off[k], d = lay.q[k];
    SparseRM gk = sf.g.middleRows(off, d);
    SparseCM gtg = (SparseCM(gk.transpose()) * SparseCM(gk)).triangularView<Eigen::Lower>();
    st.soc_gtg.push_back(std::move(gtg));
    st.soc_rows.push_back(std::move(gk));
  }
  for (std::size_t k = 0; k < lay.s.size(); ++k) {
    const int off = lay.s_off[k], d = lay.s[k];
    std::vector<Structure::PsdCol> cols;
    std::vector<int> pos(sf.n, -1);
    for (int r = off; r < off + d * d; ++r) {
      for (SparseRM::InnerIterator it(sf.g, r); it; ++it) {
        const int var = static_cast<int>(it.col());
        if (pos[var] < 0) {
          pos[var] = static_cast<int>(cols.size());
          cols.push_back({var, {}});
        }
        const int idx = r - off;
        cols[pos[var]].entries.emplace_back(idx % d, idx / d, it.value());
      }
    }
    std::sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) { return a.var < b.var; });
    st.psd_cols.push_back(std::move(cols));
  }
  return st;
}

class Kkt {
 public:
  Kkt(const Standard& sf, const Structure& st) : sf_(sf), st_(st) {}

  // Factorizes for scaling w; returns false if the system could not be factored.
  bool factor(const Scaling& w) {
    w_ = &w;
    const int n = sf_.n;
    h_.setZero(n, n);
    assemble_lp(w);
    assemble_soc(w);
    assemble_psd(w);
    const double scale = 1.0 + h_.diagonal().cwiseAbs().maxCoeff();
    use_ata_ = false;
    MatrixXd ata;
    for (int attempt = 0; attempt < 6; ++attempt) {
      const double reg = scale * 1e-13 * std::pow(100.0, attempt);
      MatrixXd m = h_;
      if (use_ata_) m += ata;
      m.diagonal().array() += reg;
      llt_.compute(m);
      if (llt_.info() == Eigen::Success) {
        if (sf_.a.rows() > 0) {
          MatrixXd at = MatrixXd(sf_.a.transpose());
          MatrixXd y = llt_.matrixL().solve(at);
          MatrixXd s = y.transpose() * y;
          s.diagonal().array() += 1e-14 * (1.0 + s.diagonal().maxCoeff());
          schur_.compute(s);
          if (schur_.info() != Eigen::Success) continue;
        }
        return true;
      }
      if (!use_ata_ && sf_.a.rows() > 0) {
        use_ata_ = true;
        ata = MatrixXd(SparseCM(sf_.a.transpose()) * SparseCM(sf_.a));
        --attempt;
      }
    }
    return false;
  }

  // Solves [0 A' G'; A 0 0; G 0 -W'W] [x; y; z] = [rx; ry; rz] with refinement.
  void solve(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& x, VectorXd& y,
             VectorXd& z) const {
    reduced(rx, ry, rz, x, y, z);
    const double rhs_norm = std::max({rx.lpNorm<Eigen::Infinity>(), ry.size() ? ry.lpNorm<Eigen::Infinity>() : 0.0,
                                      rz.lpNorm<Eigen::Infinity>(), 1e-300});
    for (int it = 0; it < 3; ++it) {
      const VectorXd e1 = rx - sf_.a.transpose() * y - sf_.g.transpose() * z;
      const VectorXd e2 = ry - sf_.a * x;
      const VectorXd e3 = rz - (sf_.g * x - wtw(z));
      const double err = std::max({e1.lpNorm<Eigen::Infinity>(), e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                   e3.lpNorm<Eigen::Infinity>()});
      if (err <= 1e-14 * rhs_norm) break;
      VectorXd dx, dy, dz;
      reduced(e1, e2, e3, dx, dy, dz);
      x += dx;
      y += dy;
      z += dz;
    }
  }

  VectorXd wtw(const VectorXd& u) const {
    return apply(sf_.lay, *w_, Op::kWT, apply(sf_.lay, *w_, Op::kW, u));
  }
  VectorXd winv2(const VectorXd& u) const {
    return apply(sf_.lay, *w_, Op::kWinv, apply(sf_.lay, *w_, Op::kWinvT, u));
  }

 private:
  void reduced(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& x, VectorXd& y,
               VectorXd& z) const {
    VectorXd r = rx + sf_.g.transpose() * winv2(rz);
    if (use_ata_) r += sf_.a.transpose() * ry;
    if (sf_.a.rows() > 0) {
      const VectorXd hr = llt_.solve(r);
      y = schur_.solve(sf_.a * hr - ry);
      x = llt_.solve(r - sf_.a.transpose() * y);
    } else {
      y.resize(0);
      x = llt_.solve(r);
    }
    z = winv2(sf_.g * x - rz);
  }

  void add_lower(int i, int j, double v) {
    if (i >= j)
      h_(i, j) += v;
    else
      h_(j, i) += v;
  }

  void assemble_lp(const Scaling& w) {
    for (int r = 0; r < sf_.lay.l; ++r) {
      const double wt = 1.0 / (w.d[r] * w.d[r]);
      const auto& row = st_.lp_rows[r];
      for (std::size_t a = 0; a < row.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) add_lower(row[a].first, row[b].first, wt * row[a].second * row[b].second);
    }
  }

  void assemble_soc(const Scaling& w) {
    const int nq = static_cast<int>(sf_.lay.q.size());
    if (nq == 0) return;
    // W^{-2} = (I + 4|v|^2 a a' - 2 a v' - 2 v a') / beta^2 with a = J v. The identity part is
    // the constant G'G; the rank-two part is split into positive and negative outer products.
    MatrixXd up(sf_.n, nq), um(sf_.n, nq);
    for (int k = 0; k < nq; ++k) {
      const VectorXd& v = w.v[k];
      VectorXd a = v;
      a.tail(a.size() - 1) *= -1.0;
      const VectorXd p = st_.soc_rows[k].transpose() * a;
      const VectorXd q = st_.soc_rows[k].transpose() * v;
      const double ib2 = 1.0 / (w.beta[k] * w.beta[k]);
      for (int c = 0; c < st_.soc_gtg[k].outerSize(); ++c)
        for (SparseCM::InnerIterator it(st_.soc_gtg[k], c); it; ++it) h_(it.row(), c) += ib2 * it.value();
      // [p q] [[c4, -2], [-2, 0]] [p q]' via its eigen-decomposition.
      const double c4 = 4.0 * v.squaredNorm();
      const double disc = std::sqrt(c4 * c4 / 4.0 + 4.0);
      const double l1 = c4 / 2.0 + disc, l2 = -4.0 / l1;  // l1 > 0 > l2, l1 * l2 = det
      // eigenvector for l: (2, -l) up to scale (from -2 x + (0 - l) y = 0 -> x = -l y / 2)
      auto vec = [&](double l) {
        const double x = -l / 2.0, y = 1.0, nrm = std::hypot(x, y);
        return VectorXd((x * p + y * q) / nrm);
      };
      up.col(k) = std::sqrt(ib2 * l1) * vec(l1);
      um.col(k) = std::sqrt(-ib2 * l2) * vec(l2);
    }
    h_.selfadjointView<Eigen::Lower>().rankUpdate(up, 1.0);
    h_.selfadjointView<Eigen::Lower>().rankUpdate(um, -1.0);
  }

  void assemble_psd(const Scaling& w) {
    for (std::size_t k = 0; k < sf_.lay.s.size(); ++k) {
      const MatrixXd zm = w.rti[k] * w.rti[k].transpose();
      const auto& cols = st_.psd_cols[k];
      // tr(Z G_i Z G_j) with G = sum val e_a e_b': sum over entry pairs of v_i v_j Z(b_j, a_i) Z(b_i, a_j).
      for (std::size_t i = 0; i < cols.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double acc = 0.0;
          for (const auto& [ai, bi, vi] : cols[i].entries)
            for (const auto& [aj, bj, vj] : cols[j].entries) acc += vi * vj * zm(bj, ai) * zm(bi, aj);
          h_(cols[i].var, cols[j].var) += acc;  // cols sorted by var
        }
      }
    }
  }

  const Standard& sf_;
  const Structure& st_;
  const Scaling* w_ = nullptr;
  MatrixXd h_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LDLT<MatrixXd> schur_;
  bool use_ata_ = false;
};

// ------------------------------------------------------------------ main loop

struct Iterate {
  VectorXd x, y, z, s;
  double tau = 1.0, kappa = 1.0;
};

struct IpmOutcome {
  Status status = Status::kNumericalFailure;
  VectorXd x;
  double pcost = 0.0, dcost = 0.0;
  SolveStats stats;
  std::string message;
};

IpmOutcome run_ipm(const Standard& sf, const SolverOptions& opts) {
  const Layout& lay = sf.lay;
  const Structure st = analyze(sf);
  Kkt kkt(sf, st);
  IpmOutcome out;
  const double nc = std::max(1.0, sf.c.norm());
  const double nb = std::max(1.0, sf.b.size() ? sf.b.norm() : 0.0);
  const double nh = std::max(1.0, sf.h.norm());
  const VectorXd e = identity(lay);

  Iterate it;
  {
    const Scaling w0 = identity_scaling(lay);
    if (!kkt.factor(w0)) {
      out.message = "initial KKT system singular";
      return out;
    }
    VectorXd x, y, z;
    kkt.solve(VectorXd::Zero(sf.n), sf.b, sf.h, x, y, z);
    it.x = x;
    it.s = -z;
    kkt.solve(-sf.c, VectorXd::Zero(sf.b.size()), VectorXd::Zero(lay.rows), x, y, z);
    it.y = y;
    it.z = z;
    const double ts = boundary_shift(lay, it.s), tz = boundary_shift(lay, it.z);
    if (ts >= -1e-8 * std::max(1.0, it.s.norm())) it.s += (1.0 + ts) * e;
    if (tz >= -1e-8 * std::max(1.0, it.z.norm())) it.z += (1.0 + tz) * e;
  }

  struct Best {
    bool have = false;
    double score = kInf;
    int iter = 0;
    Iterate it;
    double pres = 0, dres = 0, gap = 0;
  } best;

  auto finish_optimal = [&](const Iterate& cur, double pres, double dres, double gap, Status status) {
    out.status = status;
    out.x = cur.x / cur.tau;
    out.pcost = sf.c.dot(cur.x) / cur.tau;
    out.dcost = -(sf.b.dot(cur.y) + sf.h.dot(cur.z)) / cur.tau;
    out.stats.primal_residual = pres;
    out.stats.dual_residual = dres;
    out.stats.gap = gap;
  };

  const int max_iters = opts.max_iters;
  int stalls = 0;
  for (int iter = 0;; ++iter) {
    out.stats.iterations = iter;
    // Residuals of the homogeneous embedding.
    const VectorXd r1 = sf.a.transpose() * it.y + sf.g.transpose() * it.z + sf.c * it.tau;
    const VectorXd r2 = -(sf.a * it.x) + sf.b * it.tau;
    const VectorXd r3 = -(sf.g * it.x) + sf.h * it.tau - it.s;
    const double cx = sf.c.dot(it.x), by = sf.b.dot(it.y), hz = sf.h.dot(it.z);
    const double r4 = -cx - by - hz - it.kappa;
    const double sz = it.s.dot(it.z);
    const double mu = (sz + it.tau * it.kappa) / (lay.degree + 1);

    const double pres = std::max(r2.size() ? r2.norm() / nb : 0.0, r3.norm() / nh) / it.tau;
    const double dres = r1.norm() / nc / it.tau;
    const double pcost = cx / it.tau, dcost = -(by + hz) / it.tau;
    const double gap = sz / (it.tau * it.tau);
    double relgap = kInf;
    if (pcost < 0.0)
      relgap = gap / -pcost;
    else if (dcost > 0.0)
      relgap = gap / dcost;

    if (opts.verbose)
      std::fprintf(stderr, "ipm %3d pcost % .8e dcost % .8e gap %.2e pres %.2e dres %.2e k/t %.2e\n", iter,
                   pcost, dcost, gap, pres, dres, it.kappa / it.tau);

    if (pres <= opts.feas_tol && dres <= opts.feas_tol && (gap <= opts.abs_tol || relgap <= opts.rel_tol)) {
      finish_optimal(it, pres, dres, gap, Status::kOptimal);
      return out;
    }
    // Infeasibility certificates.
    if (by + hz < 0.0) {
      const double pinf = (sf.a.transpose() * it.y + sf.g.transpose() * it.z).norm() / nc / -(by + hz);
      if (pinf <= opts.feas_tol) {
        out.status = Status::kInfeasible;
        out.message = "primal infeasibility certificate";
        return out;
      }
    }
    if (cx < 0.0) {
      const double dinf = std::max(sf.a.rows() ? (sf.a * it.x).norm() / nb : 0.0,
                                   (sf.g * it.x + it.s).norm() / nh) / -cx;
      if (dinf <= opts.feas_tol) {
        out.status = Status::kUnbounded;
        out.message = "dual infeasibility certificate";
        return out;
      }
    }
    {
      const double score = std::max({pres, dres, std::min(gap, relgap)});
      if (score < best.score) {
        best.have = true;
        best.score = score;
        best.iter = iter;
        best.it = it;
        best.pres = pres;
        best.dres = dres;
        best.gap = gap;
      }
    }
    auto give_up = [&](const std::string& why) {
      const double a = opts.accept_tol;
      if (best.have && best.pres <= a && best.dres <= a && best.score <= a) {
        finish_optimal(best.it, best.pres, best.dres, best.gap, Status::kOptimal);
        out.message = "accepted at reduced accuracy: " + why;
      } else {
        out.status = Status::kNumericalFailure;
        out.message = why;
      }
      return out;
    };
    if (iter >= max_iters) return give_up("iteration limit");
    if (best.have && best.score <= opts.accept_tol && iter - best.iter >= 4) return give_up("no further progress");

    Scaling w;
    try {
      w = nt_scaling(lay, it.s, it.z);
    } catch (const NumericalError& ex) {
      return give_up(ex.what());
    }
    if (!kkt.factor(w)) return give_up("KKT factorization failed");

    VectorXd x1, y1, z1;
    kkt.solve(-sf.c, sf.b, sf.h, x1, y1, z1);
    const double den_base = -sf.c.dot(x1) - sf.b.dot(y1) - sf.h.dot(z1);

    struct Dir {
      VectorXd x, y, z, s;
      double tau = 0, kappa = 0;
    };
    auto newton = [&](const VectorXd& dx, const VectorXd& dy, const VectorXd& dz, double dtau,
                      const VectorXd& ds, double dkappa) {
      Dir d;
      const VectorXd t = apply(lay, w, Op::kWT, jordan_div(lay, w, ds));
      VectorXd x2, y2, z2;
      kkt.solve(dx, -dy, -dz - t, x2, y2, z2);
      d.tau = (dtau + dkappa / it.tau + sf.c.dot(x2) + sf.b.dot(y2) + sf.h.dot(z2)) /
              (it.kappa / it.tau + den_base);
      d.x = x2 + d.tau * x1;
      d.y = y2 + d.tau * y1;
      d.z = z2 + d.tau * z1;
      d.s = t - kkt.wtw(d.z);
      d.kappa = (dkappa - it.kappa * d.tau) / it.tau;
      return d;
    };
    auto step_to_boundary = [&](const Dir& d) {
      double a = std::min(max_step(lay, it.s, d.s), max_step(lay, it.z, d.z));
      if (d.tau < 0.0) a = std::min(a, -it.tau / d.tau);
      if (d.kappa < 0.0) a = std::min(a, -it.kappa / d.kappa);
      return a;
    };

    const VectorXd lam2 = jordan(lay, w.lambda, w.lambda);
    const Dir aff = newton(-r1, -r2, -r3, -r4, -lam2, -it.kappa * it.tau);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    const VectorXd corr = jordan(lay, apply(lay, w, Op::kWinvT, aff.s), apply(lay, w, Op::kW, aff.z));
    const double f = 1.0 - sigma;
    const Dir dir = newton(-f * r1, -f * r2, -f * r3, -f * r4, -lam2 - corr + sigma * mu * e,
                           -it.kappa * it.tau - aff.kappa * aff.tau + sigma * mu);
    const double alpha = std::min(1.0, 0.99 * step_to_boundary(dir));
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
      if (++stalls >= 3) return give_up("step length collapsed");
    } else {
      stalls = 0;
    }

    it.x += alpha * dir.x;
    it.y += alpha * dir.y;
    it.z += alpha * dir.z;
    it.s += alpha * dir.s;
    it.tau += alpha * dir.tau;
    it.kappa += alpha * dir.kappa;
    if (!(it.tau > 0.0) || !it.x.allFinite()) return give_up("iterate diverged");
  }
}

// ---------------------------------------------------------------- reduction

struct Reduced {
  Standard sf;
  std::vector<int> free_vars;  // reduced index -> original
  VectorXd fixed_x;            // values of fixed variables (original indexing)
  double objective_offset = 0.0;
  bool infeasible = false;
  std::string why;
};

constexpr double kConstTol = 1e-9;

Reduced reduce(const ConeProgram& prog, VectorXd lower, VectorXd upper) {
  Reduced red;
  const int n = prog.num_vars;
  std::vector<char> is_bin(n, 0), in_col(n, 0);
  for (int i : prog.binaries) {
    is_bin[i] = 1;
    lower[i] = std::max(lower[i], 0.0);
    upper[i] = std::min(upper[i], 1.0);
  }
  for (const auto& col : prog.assignment_columns)
    for (int i : col) in_col[i] = 1;
  for (int i = 0; i < n; ++i)
    if (lower[i] > upper[i] + kConstTol) {
      red.infeasible = true;
      red.why = "empty variable bounds";
      return red;
    }

  // Propagate assignment columns: a column with one free entry pins it.
  auto fixed = [&](int i) { return lower[i] >= upper[i]; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& col : prog.assignment_columns) {
      int nfree = 0, last = -1;
      double sum = 0.0;
      for (int i : col) {
        if (fixed(i))
          sum += lower[i];
        else {
          ++nfree;
          last = i;
        }
      }
      if (nfree == 1) {
        const double v = 1.0 - sum;
        if (v < lower[last] - kConstTol || v > upper[last] + kConstTol) {
          red.infeasible = true;
          red.why = "assignment column cannot sum to one";
          return red;
        }
        lower[last] = upper[last] = v;
        changed = true;
      }
    }
  }

  red.fixed_x = VectorXd::Zero(n);
  std::vector<int> newidx(n, -1);
  for (int i = 0; i < n; ++i) {
    if (fixed(i))
      red.fixed_x[i] = lower[i];
    else {
      newidx[i] = static_cast<int>(red.free_vars.size());
      red.free_vars.push_back(i);
    }
  }
  const int nf = static_cast<int>(red.free_vars.size());
  Standard& sf = red.sf;
  sf.n = nf;
  sf.c.resize(nf);
  for (int j = 0; j < nf; ++j) sf.c[j] = prog.objective[red.free_vars[j]];
  red.objective_offset = prog.objective.dot(red.fixed_x);

  SparseCM sel(n, nf);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < nf; ++j) t.emplace_back(red.free_vars[j], j, 1.0);
    sel.setFromTriplets(t.begin(), t.end());
  }
  // Returns reduced map and shifted offset.
  auto shrink = [&](const SparseRM& map, const VectorXd& offset) {
    SparseRM m = map * sel;
    VectorXd off = offset;
    if (map.rows() > 0) off += map * red.fixed_x;
    return std::make_pair(SparseRM(m), off);
  };

  // Equalities (explicit plus assignment sums).
  std::vector<Eigen::Triplet<double>> at;
  std::vector<double> bv;
  auto add_eq_row = [&](const std::vector<std::pair<int, double>>& terms, double rhs) {
    if (terms.empty()) {
      if (std::abs(rhs) > kConstTol * std::max(1.0, std::abs(rhs))) {
        red.infeasible = true;
        red.why = "inconsistent constant equality";
      }
      return;
    }
    const int row = static_cast<int>(bv.size());
    for (const auto& [j, v] : terms) at.emplace_back(row, j, v);
    bv.push_back(rhs);
  };
  if (prog.eq_matrix.rows() > 0) {
    auto [m, off] = shrink(prog.eq_matrix, -prog.eq_rhs);
    for (int r = 0; r < m.rows(); ++r) {
      std::vector<std::pair<int, double>> terms;
      for (SparseRM::InnerIterator i2(m, r); i2; ++i2)
        if (i2.value() != 0.0) terms.emplace_back(static_cast<int>(i2.col()), i2.value());
      add_eq_row(terms, -off[r]);
    }
  }
  for (const auto& col : prog.assignment_columns) {
    std::vector<std::pair<int, double>> terms;
    double rhs = 1.0;
    for (int i : col) {
      if (newidx[i] >= 0)
        terms.emplace_back(newidx[i], 1.0);
      else
        rhs -= red.fixed_x[i];
    }
    add_eq_row(terms, rhs);
  }
  if (red.infeasible) return red;
  sf.a.resize(static_cast<int>(bv.size()), nf);
  sf.a.setFromTriplets(at.begin(), at.end());
  sf.b = Eigen::Map<const VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));

  // Cone rows: s = h - G x with G = -map, h = offset.
  std::vector<Eigen::Triplet<double>> gt;
  std::vector<double> hv;
  auto push_rows = [&](const SparseRM& m, const VectorXd& off) {
    for (int r = 0; r < m.rows(); ++r) {
      const int row = static_cast<int>(hv.size());
      for (SparseRM::InnerIterator i2(m, r); i2; ++i2)
        if (i2.value() != 0.0) gt.emplace_back(row, static_cast<int>(i2.col()), -i2.value());
      hv.push_back(off[r]);
    }
  };
  Layout& lay = sf.lay;
  // Orthant: bounds then explicit rows.
  for (int j = 0; j < nf; ++j) {
    const int i = red.free_vars[j];
    if (std::isfinite(lower[i])) {
      gt.emplace_back(static_cast<int>(hv.size()), j, -1.0);
      hv.push_back(-lower[i]);
    }
    if (std::isfinite(upper[i]) && !(is_bin[i] && in_col[i])) {
      gt.emplace_back(static_cast<int>(hv.size()), j, 1.0);
      hv.push_back(upper[i]);
    }
  }
  if (prog.nonneg.rows() > 0) {
    auto [m, off] = shrink(prog.nonneg.map, prog.nonneg.offset);
    for (int r = 0; r < m.rows(); ++r) {
      if (m.row(r).nonZeros() == 0 || SparseRM(m.row(r)).norm() == 0.0) {
        if (off[r] < -kConstTol * std::max(1.0, std::abs(off[r]))) {
          red.infeasible = true;
          red.why = "constant inequality violated";
          return red;
        }
        continue;
      }
      const int row = static_cast<int>(hv.size());
      for (SparseRM::InnerIterator i2(m, r); i2; ++i2)
        if (i2.value() != 0.0) gt.emplace_back(row, static_cast<int>(i2.col()), -i2.value());
      hv.push_back(off[r]);
    }
  }
  // One-row second-order cones are orthant rows.
  std::vector<std::pair<SparseRM, VectorXd>> socs;
  for (const auto& blk : prog.soc) {
    auto [m, off] = shrink(blk.map, blk.offset);
    if (m.norm() == 0.0) {
      const double tail = off.size() > 1 ? off.tail(off.size() - 1).norm() : 0.0;
      if (tail - off[0] > kConstTol * std::max(1.0, off.norm())) {
        red.infeasible = true;
        red.why = "constant cone constraint violated";
        return red;
      }
      continue;
    }
    if (m.rows() == 1)
      push_rows(m, off);
    else
      socs.emplace_back(std::move(m), std::move(off));
  }
  lay.l = static_cast<int>(hv.size());
  for (auto& [m, off] : socs) {
    lay.q.push_back(static_cast<int>(m.rows()));
    push_rows(m, off);
  }
  for (const auto& blk : prog.psd) {
    auto [m, off] = shrink(blk.map, blk.offset);
    if (m.norm() == 0.0) {
      MatrixXd cm = Eigen::Map<const MatrixXd>(off.data(), blk.dim, blk.dim);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (cm + cm.transpose()), Eigen::EigenvaluesOnly);
      if (es.eigenvalues()[0] < -kConstTol * std::max(1.0, cm.norm())) {
        red.infeasible = true;
        red.why = "constant semidefinite constraint violated";
        return red;
      }
      continue;
    }
    lay.s.push_back(blk.dim);
    push_rows(m, off);
  }
  lay.finalize();
  sf.g.resize(lay.rows, nf);
  sf.g.setFromTriplets(gt.begin(), gt.end());
  sf.h = Eigen::Map<const VectorXd>(hv.data(), static_cast<Eigen::Index>(hv.size()));
  return red;
}

}  // namespace

namespace detail {

SolveResult solve_with_bounds(const ConeProgram& prog, const VectorXd& lower, const VectorXd& upper,
                              const SolverOptions& opts) {
  SolveResult res;
  Reduced red = reduce(prog, lower, upper);
  if (red.infeasible) {
    res.status = Status::kInfeasible;
    res.message = red.why;
    return res;
  }
  VectorXd x = red.fixed_x;
  if (red.sf.n == 0) {
    const Residuals r = check_feasibility(with_fixed(prog, {}), x);
    if (std::max({r.equality, r.nonneg, r.soc, r.psd}) > 1e-7) {
      res.status = Status::kInfeasible;
      res.message = "all variables fixed and constraints violated";
      return res;
    }
    res.status = Status::kOptimal;
    res.x = x;
    res.objective = res.bound = red.objective_offset;
    return res;
  }
  if (red.sf.lay.rows == 0) {
    // No cone rows: unbounded unless the objective is orthogonal to the free directions.
    res.status = Status::kNumericalFailure;
    res.message = "program without inequality rows is not supported";
    return res;
  }
  const IpmOutcome o = run_ipm(red.sf, opts);
  res.status = o.status;
  res.stats = o.stats;
  res.message = o.message;
  if (o.status == Status::kOptimal) {
    for (int j = 0; j < red.sf.n; ++j) x[red.free_vars[j]] = o.x[j];
    res.x = x;
    res.objective = o.pcost + red.objective_offset;
    res.bound = std::min(o.pcost, o.dcost) + red.objective_offset;
  }
  return res;
}

}  // namespace detail

SolveResult solve_relaxation(const ConeProgram& prog, const SolverOptions& opts) {
  prog.validate();
  return detail::solve_with_bounds(prog, prog.lower, prog.upper, opts);
}

}  // namespace drcs::conic
