#include "drcs/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "drcs/risk.hpp"
#include "drcs/rng.hpp"
#include "drcs/wasserstein.hpp"

namespace drcs {
namespace {

constexpr double kWilsonZ = 1.959963984540054;

void check(const SystemModel& model, const Schedule& s, const BoundaryConditions& b, const SimulationOptions& o) {
  model.validate();
  if (o.n_paths < 1) throw std::invalid_argument("number of paths must be positive");
  if (o.substeps < 1) throw std::invalid_argument("substeps must be positive");
  if (o.threads < 1) throw std::invalid_argument("threads must be positive");
  if (s.k_prime() < 1 || !(s.delta_t > 0.0)) throw std::invalid_argument("schedule is empty");
  if (static_cast<int>(s.k.size()) != s.k_prime()) throw std::invalid_argument("schedule gains do not match its length");
  b.validate(model.n());
  if (s.channels.e0.rows() != model.n()) throw std::invalid_argument("schedule noise channels do not match the model");
}

template <class Body>
void parallel_paths(int n_paths, int threads, Body body) {
  const int t = std::min(threads, n_paths);
  if (t <= 1) {
    for (int p = 0; p < n_paths; ++p) body(p);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      for (int p = w; p < n_paths; p += t) body(p);
    });
}

// One path of either loop. `true_loop` adds the uncertainties and (optionally) the L1 correction.
struct PathKernel {
  const SystemModel& model;
  const Schedule& schedule;
  const BoundaryConditions& boundary;
  const SimulationOptions& opts;
  const UncertaintyFunctions* unc = nullptr;
  const ControlParams* l1 = nullptr;
  std::uint32_t stream = 0;

  void run(int path, double* out) const {
    const int n = model.n(), nw = model.n_w(), kp = schedule.k_prime();
    const auto& ch = schedule.channels;
    const double h = schedule.delta_t / opts.substeps, sqh = std::sqrt(h), sqdt = std::sqrt(schedule.delta_t);
    NormalStream rng(opts.seed, stream, static_cast<std::uint32_t>(path));

    VectorXd xi0(ch.r0());
    rng.normals(0, {xi0.data(), static_cast<std::size_t>(xi0.size())});
    VectorXd x = boundary.mu0 + ch.e0 * xi0;
    std::optional<L1Drac> adapt;
    if (l1) adapt.emplace(model, *l1, h, x);

    std::vector<VectorXd> w;
    VectorXd dw(nw), dw_step(nw);
    Eigen::Map<VectorXd>(out, n) = x;
    std::uint32_t s = 1;
    for (int k = 0; k < kp; ++k) {
      const VectorXd u_star = opts.feedback ? schedule.input(k, xi0, w) : schedule.v[k];
      dw_step.setZero();
      for (int j = 0; j < opts.substeps; ++j, ++s) {
        rng.normals(s, {dw.data(), static_cast<std::size_t>(nw)});
        dw *= sqh;
        dw_step += dw;
        VectorXd u = u_star;
        if (adapt) {
          adapt->observe(x);
          u += adapt->u_l1();
        }
        VectorXd drift = model.a_mu * x;
        if (unc) {
          drift += model.b * (u + unc->h_mu(x));
          const MatrixXd diff = model.a_sigma + model.b * unc->h_sigma(x);
          if (adapt) adapt->advance(x, u_star);
          x += h * drift + diff * dw;
        } else {
          drift += model.b * u;
          x += h * drift + model.a_sigma * dw;
        }
      }
      VectorXd wk(ch.n_wj());
      for (int c = 0; c < ch.n_wj(); ++c) wk[c] = dw_step[ch.w_cols[c]] / sqdt;
      w.push_back(std::move(wk));
      Eigen::Map<VectorXd>(out + static_cast<std::size_t>(k + 1) * n, n) = x;
    }
  }
};

PathEnsemble run(const PathKernel& kernel) {
  PathEnsemble e;
  e.n_paths = kernel.opts.n_paths;
  e.k_prime = kernel.schedule.k_prime();
  e.n = kernel.model.n();
  e.delta_t = kernel.schedule.delta_t;
  e.seed = kernel.opts.seed;
  e.stream = kernel.stream;
  const std::size_t stride = static_cast<std::size_t>(e.k_prime + 1) * e.n;
  e.data.assign(stride * e.n_paths, 0.0);
  parallel_paths(e.n_paths, kernel.opts.threads, [&](int p) { kernel.run(p, e.data.data() + stride * p); });
  return e;
}

}  // namespace

MatrixXd PathEnsemble::at_step(int step) const {
  if (step < 0 || step > k_prime) throw std::out_of_range("ensemble step outside the horizon");
  MatrixXd m(n, n_paths);
  for (int p = 0; p < n_paths; ++p) m.col(p) = state(p, step);
  return m;
}

PathEnsemble simulate_nominal(const SystemModel& model, const Schedule& schedule, const BoundaryConditions& boundary,
                              const SimulationOptions& opts) {
  check(model, schedule, boundary, opts);
  return run(PathKernel{model, schedule, boundary, opts, nullptr, nullptr,
                        static_cast<std::uint32_t>(StreamId::kNominal)});
}

PathEnsemble simulate_true(const SystemModel& model, const UncertaintyFunctions& unc, const Schedule& schedule,
                           const std::optional<ControlParams>& l1, const BoundaryConditions& boundary,
                           const SimulationOptions& opts) {
  check(model, schedule, boundary, opts);
  if (!unc.h_mu || !unc.h_sigma) throw std::invalid_argument("uncertainty functions must be set");
  if (l1) {
    l1->validate();
    const double h = schedule.delta_t / opts.substeps;
    const double ratio = l1->t_s / h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0)
      throw std::invalid_argument("simulation substep must divide T_s");
  }
  return run(PathKernel{model, schedule, boundary, opts, &unc, l1 ? &*l1 : nullptr,
                        static_cast<std::uint32_t>(StreamId::kTrue)});
}

EmpiricalMoments empirical_moments(const PathEnsemble& e, int step) {
  const MatrixXd x = e.at_step(step);
  EmpiricalMoments m;
  m.mean = x.rowwise().mean();
  const MatrixXd c = x.colwise() - m.mean;
  m.cov = e.n_paths > 1 ? MatrixXd(c * c.transpose() / (e.n_paths - 1)) : MatrixXd::Zero(e.n, e.n);
  return m;
}

RateInterval wilson_interval(long hits, long n) {
  if (n <= 0 || hits < 0 || hits > n) throw std::invalid_argument("wilson_interval: need 0 <= hits <= n, n > 0");
  const double p = static_cast<double>(hits) / n, z2 = kWilsonZ * kWilsonZ, nn = static_cast<double>(n);
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = kWilsonZ / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  // The bounds are exactly 0 and 1 at the ends; the formula only reaches them up to rounding.
  return {p, hits == 0 ? 0.0 : std::max(0.0, center - half), hits == n ? 1.0 : std::min(1.0, center + half), hits, n};
}

std::vector<RateInterval> violation_rate(const PathEnsemble& e, const SafeSet& set) {
  if (e.n_paths < 1) throw std::invalid_argument("violation_rate: empty ensemble");
  std::vector<RateInterval> out;
  for (int k = 0; k <= e.k_prime; ++k) {
    long outside = 0;
    for (int p = 0; p < e.n_paths; ++p)
      if (!contains(set, e.state(p, k))) ++outside;
    out.push_back(wilson_interval(outside, e.n_paths));
  }
  return out;
}

double safe_set_loss(const SafeSet& set, const VectorXd& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : set.regions) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& f : r.faces) worst = std::max(worst, f.c.dot(x) - f.d);
    best = std::min(best, worst);
  }
  return best;
}

TailMean tail_mean(std::vector<double> samples, double tail_mass) {
  if (samples.empty()) throw std::invalid_argument("tail_mean: empty sample");
  if (!(tail_mass > 0.0 && tail_mass <= 1.0)) throw std::invalid_argument("tail_mean: tail mass must lie in (0, 1]");
  const auto n = samples.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(tail_mass * static_cast<double>(n) - 1e-9)));
  std::nth_element(samples.begin(), samples.begin() + (n - k), samples.end());
  std::sort(samples.begin() + (n - k), samples.end());
  double s = 0.0, s2 = 0.0;
  for (auto it = samples.begin() + (n - k); it != samples.end(); ++it) s += *it;
  const double mean = s / k;
  for (auto it = samples.begin() + (n - k); it != samples.end(); ++it) s2 += (*it - mean) * (*it - mean);
  const double se = k > 1 ? std::sqrt(s2 / (k - 1) / k) : 0.0;
  return {mean, se};
}

std::vector<int> subsample_paths(int n_paths, int count, std::uint64_t seed) {
  if (count < 0 || count > n_paths) throw std::invalid_argument("subsample larger than the ensemble");
  std::vector<int> idx(n_paths);
  std::iota(idx.begin(), idx.end(), 0);
  const NormalStream rng(seed, static_cast<std::uint32_t>(StreamId::kSubsample), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform(0, static_cast<std::uint32_t>(i)) * (n_paths - i));
    std::swap(idx[i], idx[std::min(j, n_paths - 1)]);
  }
  idx.resize(count);
  return idx;
}

W2Estimate ensemble_w2(const PathEnsemble& a, const PathEnsemble& b, int step, int points, int replicates,
                       std::uint64_t seed) {
  if (a.n != b.n) throw std::invalid_argument("ensemble_w2: dimension mismatch");
  if (points < 1 || replicates < 1) throw std::invalid_argument("ensemble_w2: need positive sizes");
  const int n_min = std::min(a.n_paths, b.n_paths);
  const int pts = std::min(points, n_min);
  const int reps = std::min(replicates, n_min / pts);
  const auto ia = subsample_paths(a.n_paths, pts * reps, seed);
  const auto ib = subsample_paths(b.n_paths, pts * reps, seed ^ 0x9e3779b97f4a7c15ULL);
  W2Estimate est;
  MatrixXd sa(a.n, pts), sb(b.n, pts);
  for (int r = 0; r < reps; ++r) {
    for (int i = 0; i < pts; ++i) {
      sa.col(i) = a.state(ia[r * pts + i], step);
      sb.col(i) = b.state(ib[r * pts + i], step);
    }
    est.replicates.push_back(empirical_w2(sa, sb));
  }
  double s = 0.0;
  for (double v : est.replicates) s += v;
  est.value = s / reps;
  if (reps > 1) {
    double s2 = 0.0;
    for (double v : est.replicates) s2 += (v - est.value) * (v - est.value);
    est.standard_error = std::sqrt(s2 / (reps - 1) / reps);
  }
  return est;
}

double SimulationReport::max_w2() const {
  double m = 0.0;
  for (const auto& s : steps) m = std::max(m, s.w2_true_nominal.value);
  return m;
}

int SimulationReport::argmax_w2() const {
  int arg = 0;
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i].w2_true_nominal.value > steps[arg].w2_true_nominal.value) arg = static_cast<int>(i);
  return arg;
}

SimulationReport build_report(const PathEnsemble& nominal, const PathEnsemble& truth, const ReportInputs& in) {
  if (!in.solution || !in.safe_set) throw std::invalid_argument("build_report: missing solution or safe set");
  if (in.threads < 1) throw std::invalid_argument("threads must be positive");
  if (nominal.k_prime != truth.k_prime || nominal.n != truth.n)
    throw std::invalid_argument("build_report: ensembles have different shapes");
  const auto& sol = *in.solution;
  const int kp = truth.k_prime;
  if (static_cast<int>(sol.moments.mean.size()) != kp + 1 || static_cast<int>(sol.decision.region.size()) != kp)
    throw std::invalid_argument("build_report: solution horizon differs from the ensembles");

  SimulationReport rep;
  rep.n_paths = truth.n_paths;
  rep.seed = in.seed;
  rep.l1_enabled = in.l1_enabled;
  rep.feedback = in.feedback;
  rep.delta_s = in.delta_s;
  rep.rho = in.rho;
  rep.w2_points = std::min({in.w2_points, nominal.n_paths, truth.n_paths});
  rep.w2_replicates = std::min(in.w2_replicates, std::min(nominal.n_paths, truth.n_paths) / rep.w2_points);
  const auto rates = violation_rate(truth, *in.safe_set);

  // Steps are independent and each fills its own slot, so the thread count cannot change the result.
  rep.steps.resize(kp + 1);
  parallel_paths(kp + 1, in.threads, [&](int k) {
    StepReport& s = rep.steps[k];
    s.step = k;
    s.t = k * truth.delta_t;
    s.nominal = empirical_moments(nominal, k);
    s.truth = empirical_moments(truth, k);
    s.planned_mean = sol.moments.mean[k];
    s.planned_cov = sol.moments.cov[k];
    s.w2_true_nominal = ensemble_w2(truth, nominal, k, rep.w2_points, rep.w2_replicates, in.seed + k);
    s.w2_true_planned = gaussian_w2(s.truth.mean, s.truth.cov, s.planned_mean, s.planned_cov);
    s.violation = rates[k];

    std::vector<double> loss(truth.n_paths);
    for (int p = 0; p < truth.n_paths; ++p) loss[p] = safe_set_loss(*in.safe_set, truth.state(p, k));
    s.loss_cvar = tail_mean(loss, in.delta_s);

    const int j = sol.decision.region[std::min(k, kp - 1)];
    const auto& region = in.safe_set->regions[j];
    const auto risks = face_risks(region, in.delta_s);
    for (std::size_t l = 0; l < region.faces.size(); ++l) {
      const auto& f = region.faces[l];
      for (int p = 0; p < truth.n_paths; ++p) loss[p] = f.c.dot(truth.state(p, k)) - f.d;
      s.faces.push_back({j, static_cast<int>(l), risks[l], tail_mean(loss, risks[l])});
    }
  });
  return rep;
}

SafetyVerdict verify_safety(const SimulationReport& report, double delta_s) {
  SafetyVerdict v;
  if (report.steps.empty()) {
    v.reason = "report has no steps";
    return v;
  }
  for (const auto& s : report.steps) {
    if (s.violation.upper > delta_s) {
      v.first_failing_step = s.step;
      v.reason = "violation rate upper bound " + std::to_string(s.violation.upper) + " exceeds delta_s at step " +
                 std::to_string(s.step);
      return v;
    }
    if (s.loss_cvar.value > 2.0 * s.loss_cvar.standard_error) {
      v.first_failing_step = s.step;
      v.reason = "empirical CVaR of the safe-set loss " + std::to_string(s.loss_cvar.value) +
                 " is positive beyond two standard errors at step " + std::to_string(s.step);
      return v;
    }
  }
  v.ok = true;
  return v;
}

}  // namespace drcs
