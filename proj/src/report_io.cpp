#include "drcs/report_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "drcs/errors.hpp"
#include "json_reader.hpp"

namespace drcs {

using jsonio::json;
using jsonio::Object;
using jsonio::to_json;

namespace {

std::string text(const json& j) { return j.dump(1) + "\n"; }

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

json faces_json(const SafeSet& set) {
  json regions = json::array();
  for (const auto& r : set.regions) {
    json faces = json::array();
    for (const auto& f : r.faces) faces.push_back({{"c", to_json(f.c)}, {"d", f.d}});
    json jr = {{"faces", faces}};
    if (!r.face_weights.empty()) jr["weights"] = r.face_weights;
    regions.push_back(jr);
  }
  return regions;
}

SafeSet read_faces(Object& o, const std::string& key) {
  SafeSet set;
  const json& regions = o.array(key);
  for (std::size_t j = 0; j < regions.size(); ++j) {
    Object r(regions[j], o.at(key) + "[" + std::to_string(j) + "]");
    ConvexRegion region;
    const json& faces = r.array("faces");
    for (std::size_t l = 0; l < faces.size(); ++l) {
      Object f(faces[l], r.at("faces") + "[" + std::to_string(l) + "]");
      region.faces.push_back({f.vector("c"), f.number("d")});
      f.finish();
    }
    if (r.has("weights")) {
      const VectorXd w = r.vector("weights");
      region.face_weights.assign(w.data(), w.data() + w.size());
    }
    r.finish();
    set.regions.push_back(std::move(region));
  }
  return set;
}

json moments_json(const EmpiricalMoments& m) { return {{"mean", to_json(m.mean)}, {"cov", to_json(m.cov)}}; }

EmpiricalMoments read_moments(Object o) {
  EmpiricalMoments m{o.vector("mean"), o.matrix("cov")};
  o.finish();
  return m;
}

json tail_json(const TailMean& t) { return {{"value", t.value}, {"standard_error", t.standard_error}}; }

TailMean read_tail(Object o) {
  TailMean t{o.number("value"), o.number("standard_error")};
  o.finish();
  return t;
}

conic::Status status_from(const std::string& s, const std::string& where) {
  for (auto st : {conic::Status::kOptimal, conic::Status::kInfeasible, conic::Status::kUnbounded,
                  conic::Status::kNumericalFailure})
    if (s == conic::to_string(st)) return st;
  throw ParseError(where, "unknown status '" + s + "'");
}

}  // namespace

std::string solution_json(const PlannerSolution& sol, const Scenario& sc) {
  json j;
  j["schema"] = kSolutionSchema;
  j["scenario_hash"] = sc.hash;
  j["status"] = conic::to_string(sol.status);
  j["message"] = sol.message;
  j["diagnostic"] = sol.diagnostic;
  j["rho"] = sc.rho();
  j["delta_t"] = sc.delta_t;
  j["k_prime"] = sc.k_prime;
  j["objective"] = jsonio::real(sol.objective);
  j["solver_objective"] = jsonio::real(sol.solver_objective);
  j["max_margin"] = jsonio::real(sol.max_margin);
  j["stats"] = {{"nodes", sol.stats.nodes}, {"iterations", sol.stats.iterations}, {"gap", jsonio::real(sol.stats.gap)},
                {"primal_residual", jsonio::real(sol.stats.primal_residual)}, {"dual_residual", jsonio::real(sol.stats.dual_residual)}};
  json margins = json::array();
  for (const auto& m : sol.margins)
    margins.push_back({{"region", m.region}, {"face", m.face}, {"column", m.column}, {"endpoint", m.endpoint},
                       {"value", jsonio::real(m.value)}});
  j["margins"] = margins;
  json big_m = json::array();
  for (const auto& row : sol.big_m) {
    json jr = json::array();
    for (double x : row) jr.push_back(jsonio::real(x));
    big_m.push_back(jr);
  }
  j["big_m"] = big_m;
  if (sol.status == conic::Status::kOptimal) {
    j["channels"] = {{"e0", to_json(sol.channels.e0)}, {"w_cols", sol.channels.w_cols}};
    json steps = json::array();
    for (std::size_t k = 0; k < sol.decision.v.size(); ++k)
      steps.push_back({{"region", sol.decision.region[k]}, {"v", to_json(sol.decision.v[k])},
                       {"k", sol.decision.k[k].cols() ? to_json(sol.decision.k[k]) : json::array()}});
    j["steps"] = steps;
    json mean = json::array(), cov = json::array();
    for (std::size_t k = 0; k < sol.moments.mean.size(); ++k) {
      mean.push_back(to_json(sol.moments.mean[k]));
      cov.push_back(to_json(sol.moments.cov[k]));
    }
    j["moments"] = {{"mean", mean}, {"cov", cov}};
  }
  return text(j);
}

std::string schedule_csv(const PlannerSolution& sol, double delta_t) {
  std::ostringstream os;
  const int m = sol.decision.v.empty() ? 0 : static_cast<int>(sol.decision.v.front().size());
  os << "step,t_start,t_end,region";
  for (int a = 0; a < m; ++a) os << ",v" << a;
  os << ",gain_norm\n";
  for (std::size_t k = 0; k < sol.decision.v.size(); ++k) {
    os << k << "," << num(k * delta_t) << "," << num((k + 1) * delta_t) << "," << sol.decision.region[k];
    for (int a = 0; a < m; ++a) os << "," << num(sol.decision.v[k][a]);
    os << "," << num(sol.decision.k[k].size() ? sol.decision.k[k].norm() : 0.0) << "\n";
  }
  return os.str();
}

LoadedSolution parse_solution(const std::string& txt, const std::string& source) {
  const json doc = jsonio::parse_text(txt, source);
  Object o(doc, "");
  if (o.string("schema") != kSolutionSchema) throw ParseError("schema", "not a solution file");
  LoadedSolution out;
  out.file_hash = sha256_hex(txt);
  out.scenario_hash = o.string("scenario_hash");
  auto& s = out.solution;
  s.status = status_from(o.string("status"), "status");
  s.message = o.string("message");
  s.diagnostic = o.string("diagnostic");
  o.number("rho");
  o.number("delta_t");
  const long kp = o.integer("k_prime");
  s.objective = o.real("objective");
  s.solver_objective = o.real("solver_objective");
  s.max_margin = o.real("max_margin");
  {
    Object st = o.object("stats");
    s.stats.nodes = static_cast<int>(st.integer("nodes"));
    s.stats.iterations = static_cast<int>(st.integer("iterations"));
    s.stats.gap = st.real("gap");
    s.stats.primal_residual = st.real("primal_residual");
    s.stats.dual_residual = st.real("dual_residual");
    st.finish();
  }
  const json& margins = o.array("margins");
  for (std::size_t i = 0; i < margins.size(); ++i) {
    Object m(margins[i], "margins[" + std::to_string(i) + "]");
    s.margins.push_back({static_cast<int>(m.integer("region")), static_cast<int>(m.integer("face")),
                         static_cast<int>(m.integer("column")), static_cast<int>(m.integer("endpoint")),
                         m.real("value")});
    m.finish();
  }
  const json& big_m = o.array("big_m");
  for (std::size_t i = 0; i < big_m.size(); ++i) {
    const VectorXd row = Object::as_vector(big_m[i], "big_m[" + std::to_string(i) + "]");
    s.big_m.emplace_back(row.data(), row.data() + row.size());
  }
  if (s.status == conic::Status::kOptimal) {
    Object ch = o.object("channels");
    s.channels.e0 = ch.matrix("e0");
    for (const auto& c : ch.array("w_cols")) s.channels.w_cols.push_back(static_cast<int>(Object::as_integer(c, ch.at("w_cols"))));
    ch.finish();
    const json& steps = o.array("steps");
    if (static_cast<long>(steps.size()) != kp) throw ParseError("steps", "expected k_prime entries");
    for (std::size_t k = 0; k < steps.size(); ++k) {
      Object st(steps[k], "steps[" + std::to_string(k) + "]");
      s.decision.region.push_back(static_cast<int>(st.integer("region")));
      s.decision.v.push_back(st.vector("v"));
      const json& g = st.array("k");
      s.decision.k.push_back(g.empty() ? MatrixXd(s.decision.v.back().size(), 0) : Object::as_matrix(g, st.at("k")));
      st.finish();
    }
    Object mo = o.object("moments");
    const json& mean = mo.array("mean");
    const json& cov = mo.array("cov");
    if (static_cast<long>(mean.size()) != kp + 1 || cov.size() != mean.size())
      throw ParseError("moments", "expected k_prime + 1 entries");
    for (std::size_t k = 0; k < mean.size(); ++k) {
      s.moments.mean.push_back(Object::as_vector(mean[k], "moments.mean"));
      s.moments.cov.push_back(Object::as_matrix(cov[k], "moments.cov"));
    }
    mo.finish();
  }
  o.finish();
  return out;
}

std::string report_json(const RunReport& r) {
  const auto& sim = r.sim;
  json j;
  j["schema"] = kReportSchema;
  j["scenario_hash"] = r.scenario_hash;
  j["solution_hash"] = r.solution_hash;
  j["settings"] = {{"paths", sim.n_paths},         {"seed", sim.seed},
                   {"l1_enabled", sim.l1_enabled}, {"feedback", sim.feedback},
                   {"substeps", r.substeps},       {"delta_s", sim.delta_s},
                   {"rho", sim.rho},               {"w2_points", sim.w2_points},
                   {"w2_replicates", sim.w2_replicates}};
  if (r.certified_rho) j["settings"]["certified_rho"] = *r.certified_rho;
  j["target"] = {{"mu_t", to_json(r.mu_t)}, {"sigma_t", to_json(r.sigma_t)}};
  j["steering"] = {{"paths", r.steering.n_paths}, {"mean", to_json(r.steering.mean)}, {"cov", to_json(r.steering.cov)}};
  j["safe_set"] = faces_json(r.safe_set);
  j["projection"] = r.projection;
  j["region"] = r.region;

  json steps = json::array();
  for (const auto& s : sim.steps) {
    json faces = json::array();
    for (const auto& f : s.faces)
      faces.push_back({{"region", f.region}, {"face", f.face}, {"tail_mass", f.tail_mass}, {"cvar", tail_json(f.cvar)}});
    steps.push_back({{"step", s.step},
                     {"t", s.t},
                     {"planned", {{"mean", to_json(s.planned_mean)}, {"cov", to_json(s.planned_cov)}}},
                     {"nominal", moments_json(s.nominal)},
                     {"truth", moments_json(s.truth)},
                     {"violation", {{"hits", s.violation.hits}, {"paths", s.violation.n}}},
                     {"loss_cvar", tail_json(s.loss_cvar)},
                     {"faces", faces}});
  }
  j["steps"] = steps;

  json w2 = json::array();
  for (const auto& s : sim.steps)
    w2.push_back({{"step", s.step},
                  {"true_nominal", s.w2_true_nominal.value},
                  {"standard_error", s.w2_true_nominal.standard_error},
                  {"replicates", s.w2_true_nominal.replicates},
                  {"true_planned_gaussian", s.w2_true_planned}});
  j["w2"] = w2;

  json fan = json::array();
  for (const auto& p : r.fan) fan.push_back(to_json(MatrixXd(p.transpose())));
  j["fan"] = fan;
  return text(j);
}

RunReport parse_report(const std::string& txt, const std::string& source) {
  const json doc = jsonio::parse_text(txt, source);
  Object o(doc, "");
  if (o.string("schema") != kReportSchema) throw ParseError("schema", "not a report file");
  RunReport r;
  r.scenario_hash = o.string("scenario_hash");
  r.solution_hash = o.string("solution_hash");
  auto& sim = r.sim;
  {
    Object s = o.object("settings");
    sim.n_paths = static_cast<int>(s.integer("paths"));
    sim.seed = s.raw("seed").get<std::uint64_t>();
    sim.l1_enabled = s.boolean("l1_enabled");
    sim.feedback = s.boolean("feedback");
    r.substeps = static_cast<int>(s.integer("substeps"));
    sim.delta_s = s.number("delta_s");
    sim.rho = s.number("rho");
    sim.w2_points = static_cast<int>(s.integer("w2_points"));
    sim.w2_replicates = static_cast<int>(s.integer("w2_replicates"));
    if (s.has("certified_rho")) r.certified_rho = s.number("certified_rho");
    s.finish();
    if (sim.n_paths < 1) throw ParseError("settings.paths", "must be positive");
  }
  {
    Object t = o.object("target");
    r.mu_t = t.vector("mu_t");
    r.sigma_t = t.matrix("sigma_t");
    t.finish();
  }
  {
    Object s = o.object("steering");
    r.steering.n_paths = static_cast<int>(s.integer("paths"));
    r.steering.mean = s.vector("mean");
    r.steering.cov = s.matrix("cov");
    s.finish();
  }
  r.safe_set = read_faces(o, "safe_set");
  {
    const json& p = o.array("projection");
    if (p.size() != 2) throw ParseError("projection", "expected two indices");
    for (int i = 0; i < 2; ++i) r.projection[i] = static_cast<int>(Object::as_integer(p[i], "projection"));
  }
  for (const auto& v : o.array("region")) r.region.push_back(static_cast<int>(Object::as_integer(v, "region")));

  const json& steps = o.array("steps");
  if (steps.empty()) throw ParseError("steps", "report has no steps");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::string at = "steps[" + std::to_string(k) + "]";
    Object s(steps[k], at);
    StepReport st;
    st.step = static_cast<int>(s.integer("step"));
    st.t = s.number("t");
    {
      Object p = s.object("planned");
      st.planned_mean = p.vector("mean");
      st.planned_cov = p.matrix("cov");
      p.finish();
    }
    st.nominal = read_moments(s.object("nominal"));
    st.truth = read_moments(s.object("truth"));
    {
      Object v = s.object("violation");
      const long hits = v.integer("hits"), n = v.integer("paths");
      v.finish();
      if (n < 1 || hits < 0 || hits > n) throw ParseError(v.path(), "need 0 <= hits <= paths");
      st.violation = wilson_interval(hits, n);  // recomputed, never read back
    }
    st.loss_cvar = read_tail(s.object("loss_cvar"));
    const json& faces = s.array("faces");
    for (std::size_t l = 0; l < faces.size(); ++l) {
      Object f(faces[l], s.at("faces") + "[" + std::to_string(l) + "]");
      st.faces.push_back({static_cast<int>(f.integer("region")), static_cast<int>(f.integer("face")),
                          f.number("tail_mass"), read_tail(f.object("cvar"))});
      f.finish();
    }
    s.finish();
    sim.steps.push_back(std::move(st));
  }

  if (!o.has("w2")) throw ParseError("w2", "missing W2 section");
  const json& w2 = o.array("w2");
  if (w2.size() != sim.steps.size()) throw ParseError("w2", "expected one entry per step");
  for (std::size_t k = 0; k < w2.size(); ++k) {
    Object w(w2[k], "w2[" + std::to_string(k) + "]");
    if (w.integer("step") != sim.steps[k].step) throw ParseError(w.at("step"), "does not match steps");
    auto& est = sim.steps[k].w2_true_nominal;
    est.value = w.number("true_nominal");
    est.standard_error = w.number("standard_error");
    const VectorXd reps = w.vector("replicates");
    est.replicates.assign(reps.data(), reps.data() + reps.size());
    sim.steps[k].w2_true_planned = w.number("true_planned_gaussian");
    w.finish();
  }

  for (const auto& p : o.array("fan")) r.fan.push_back(MatrixXd(Object::as_matrix(p, "fan").transpose()));
  o.finish();
  return r;
}

std::string steps_csv(const RunReport& r) {
  std::ostringstream os;
  os << "step,t,violations,paths,violation_rate,wilson_lower,wilson_upper,loss_cvar,loss_cvar_se,"
        "w2_true_nominal,w2_se,w2_true_planned_gaussian,truth_mean_error_norm\n";
  for (const auto& s : r.sim.steps) {
    os << s.step << "," << num(s.t) << "," << s.violation.hits << "," << s.violation.n << "," << num(s.violation.rate)
       << "," << num(s.violation.lower) << "," << num(s.violation.upper) << "," << num(s.loss_cvar.value) << ","
       << num(s.loss_cvar.standard_error) << "," << num(s.w2_true_nominal.value) << ","
       << num(s.w2_true_nominal.standard_error) << "," << num(s.w2_true_planned) << ","
       << num((s.truth.mean - s.planned_mean).norm()) << "\n";
  }
  return os.str();
}

EnsembleFiles ensemble_files(const PathEnsemble& e, const std::string& scenario_hash, const std::string& label) {
  EnsembleFiles f;
  f.data.resize(e.data.size() * sizeof(double));
  std::memcpy(f.data.data(), e.data.data(), f.data.size());
  json j = {{"schema", kEnsembleSchema},
            {"label", label},
            {"scenario_hash", scenario_hash},
            {"shape", {e.n_paths, e.k_prime + 1, e.n}},
            {"layout", "float64 little-endian, [path][step][state]"},
            {"delta_t", e.delta_t},
            {"seed", e.seed},
            {"stream", e.stream}};
  f.sidecar = text(j);
  return f;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + path);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace drcs
