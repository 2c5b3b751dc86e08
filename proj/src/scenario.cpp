#include "drcs/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "drcs/errors.hpp"
#include "drcs/wasserstein.hpp"
#include "json_reader.hpp"

namespace drcs {

using jsonio::json;
using jsonio::Object;

namespace {

// Runs a module-level validator and reports its message against a field path.
template <class F>
void check(const std::string& where, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ParseError(where, e.what());
  }
}

SystemModel read_system(Object o) {
  SystemModel s;
  s.a_mu = o.matrix("a_mu");
  s.b = o.matrix("b");
  s.a_sigma = o.matrix("a_sigma");
  check(o.path(), [&] { s.validate(); });
  if (o.has("stabilizing_gain")) {
    const MatrixXd k = o.matrix("stabilizing_gain");
    if (k.rows() != s.m() || k.cols() != s.n()) throw ParseError(o.at("stabilizing_gain"), "must be m x n");
    s.a_mu += s.b * k;
  }
  o.finish();
  return s;
}

DriftTerm read_drift(Object o) {
  DriftTerm t;
  const std::string family = o.string("family");
  if (family == "constant") {
    t.kind = DriftTerm::Kind::kConstant;
    t.h0 = o.vector("value");
  } else if (family == "linear_saturated") {
    t.kind = DriftTerm::Kind::kLinearSaturated;
    t.gain = o.matrix("gain");
    t.saturation = o.number("saturation");
  } else if (family == "sinusoidal") {
    t.kind = DriftTerm::Kind::kSinusoidal;
    t.amplitude = o.vector("amplitude");
    t.gain = o.matrix("frequency");
    t.phase = o.vector("phase");
  } else {
    throw ParseError(o.at("family"), "unknown drift family '" + family + "'");
  }
  o.finish();
  return t;
}

DiffusionTerm read_diffusion(Object o) {
  DiffusionTerm t;
  const std::string family = o.string("family");
  if (family == "constant") {
    t.kind = DiffusionTerm::Kind::kConstant;
  } else if (family == "state_norm") {
    t.kind = DiffusionTerm::Kind::kStateNorm;
    t.scale = o.number("scale");
  } else {
    throw ParseError(o.at("family"), "unknown diffusion family '" + family + "'");
  }
  t.e = o.matrix("shape");
  o.finish();
  return t;
}

UncertaintySpec read_uncertainty(Object o, const SystemModel& s) {
  UncertaintySpec u;
  if (o.has("drift")) {
    const json& a = o.array("drift");
    for (std::size_t i = 0; i < a.size(); ++i) u.drift.push_back(read_drift(Object(a[i], o.at("drift") + "[" + std::to_string(i) + "]")));
  }
  if (o.has("diffusion")) {
    const json& a = o.array("diffusion");
    for (std::size_t i = 0; i < a.size(); ++i)
      u.diffusion.push_back(read_diffusion(Object(a[i], o.at("diffusion") + "[" + std::to_string(i) + "]")));
  }
  o.finish();
  check(o.path(), [&] { u.validate(s.n(), s.m(), s.n_w()); });
  return u;
}

SafeSet read_safe_set(Object o, int n) {
  SafeSet set;
  const json& regions = o.array("regions");
  for (std::size_t j = 0; j < regions.size(); ++j) {
    Object r(regions[j], o.at("regions") + "[" + std::to_string(j) + "]");
    ConvexRegion region;
    const json& faces = r.array("faces");
    for (std::size_t l = 0; l < faces.size(); ++l) {
      Object f(faces[l], r.at("faces") + "[" + std::to_string(l) + "]");
      HalfSpace h{f.vector("c"), f.number("d")};
      if (h.c.size() != n) throw ParseError(f.at("c"), "must have the state dimension");
      const std::string sense = f.has("sense") ? f.string("sense") : "le";
      if (sense == "ge") {
        h.c = -h.c;
        h.d = -h.d;
      } else if (sense != "le") {
        throw ParseError(f.at("sense"), "expected \"le\" or \"ge\"");
      }
      f.finish();
      region.faces.push_back(std::move(h));
    }
    if (r.has("weights")) {
      const VectorXd w = r.vector("weights");
      region.face_weights.assign(w.data(), w.data() + w.size());
    }
    r.finish();
    set.regions.push_back(std::move(region));
  }
  o.finish();
  check(o.path(), [&] { validate(set); });
  return set;
}

BoundaryConditions read_boundary(Object o, int n) {
  BoundaryConditions b{o.vector("mu0"), o.vector("mu_t"), o.matrix("sigma0"), o.matrix("sigma_t")};
  o.finish();
  check(o.path(), [&] { b.validate(n); });
  return b;
}

RhoCertificateInputs read_certificate(Object& o, const Scenario& sc) {
  RhoCertificateInputs c;
  c.p_order = static_cast<int>(o.integer("p_order", 1));
  c.delta_star = o.number("delta_star");
  c.init_gap = o.number("init_gap");
  // Non-normative default when the scenario does not pin it.
  c.delta_a_sigma = o.number("delta_a_sigma", sc.model.a_sigma.norm() * std::sqrt(sc.delta_t * sc.k_prime));
  c.rho_a = o.number("rho_a");
  c.epsilon = o.number("epsilon", 0.0);
  c.zeta1_coeff = o.number("zeta1_coeff");
  c.zeta2_coeff = o.number("zeta2_coeff");
  c.beta1 = o.number("beta1");
  c.beta2 = o.number("beta2");
  c.rho_inflation = o.number("rho_inflation", 0.0);
  check(o.path(), [&] { c.validate(); });
  return c;
}

MatrixXd square(Object& o, const std::string& key, int dim) {
  const MatrixXd m = o.matrix(key);
  if (m.rows() != dim || m.cols() != dim) throw ParseError(o.at(key), "must be " + std::to_string(dim) + " x " + std::to_string(dim));
  if (!is_symmetric_psd(m, 1e-12)) throw ParseError(o.at(key), "must be symmetric positive semidefinite");
  return m;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  const json doc = jsonio::parse_text(text, source);
  Object root(doc, "");
  const std::string schema = root.string("schema");
  if (schema != kScenarioSchema)
    throw ParseError("schema", "unsupported schema '" + schema + "' (expected " + kScenarioSchema + ")");

  Scenario sc;
  // Keys of a JSON object are stored sorted, so the dump is canonical for the document's content.
  sc.hash = sha256_hex(doc.dump());
  sc.name = root.has("name") ? root.string("name") : "";
  sc.model = read_system(root.object("system"));
  const int n = sc.model.n(), m = sc.model.m();

  {
    Object h = root.object("horizon");
    sc.horizon = h.number("T");
    sc.delta_t = h.number("delta_t");
    h.finish();
    if (!(sc.horizon > 0.0) || !(sc.delta_t > 0.0)) throw ParseError(h.path(), "T and delta_t must be positive");
    const double ratio = sc.horizon / sc.delta_t;
    sc.k_prime = static_cast<int>(std::lround(ratio));
    if (sc.k_prime < 1 || std::abs(ratio - sc.k_prime) > 1e-9 * ratio)
      throw ParseError(h.path(), "delta_t must divide T");
  }

  sc.uncertainty = root.has("uncertainty") ? read_uncertainty(root.object("uncertainty"), sc.model) : UncertaintySpec{};
  sc.safe_set = read_safe_set(root.object("safe_set"), n);
  sc.boundary = read_boundary(root.object("boundary"), n);

  {
    Object r = root.object("risk");
    sc.delta_s = r.number("delta_s");
    r.finish();
    if (!(sc.delta_s > 0.0 && sc.delta_s < 1.0)) throw ParseError(r.at("delta_s"), "must lie in (0, 1)");
  }
  {
    Object c = root.object("cost");
    sc.q = square(c, "q", n);
    sc.r = square(c, "r", m);
    if (c.has("q_terminal")) sc.q_terminal = square(c, "q_terminal", n);
    c.finish();
    if (!(min_eigenvalue(sc.r) > 0.0)) throw ParseError(c.at("r"), "must be positive definite");
  }

  if (root.has("l1drac")) {
    Object o = root.object("l1drac");
    ControlParams p{o.number("omega"), o.number("t_s"), o.number("lambda_s")};
    o.finish();
    check(o.path(), [&] { p.validate(); });
    sc.l1 = p;
  }

  {
    Object o = root.object("monte_carlo");
    auto& mc = sc.monte_carlo;
    mc.paths = static_cast<int>(o.integer("paths"));
    const long seed = o.integer("seed");
    if (seed < 0) throw ParseError(o.at("seed"), "must be nonnegative");
    mc.seed = static_cast<std::uint64_t>(seed);
    mc.threads = static_cast<int>(o.integer("threads", 1));
    sc.substeps = static_cast<int>(o.integer("substeps", 1));
    mc.w2_points = static_cast<int>(o.integer("w2_points", 2000));
    mc.w2_replicates = static_cast<int>(o.integer("w2_replicates", 4));
    o.finish();
    if (mc.paths < 1) throw ParseError(o.at("paths"), "must be positive");
    if (mc.threads < 1) throw ParseError(o.at("threads"), "must be positive");
    if (sc.substeps < 1) throw ParseError(o.at("substeps"), "must be positive");
    if (mc.w2_points < 1 || mc.w2_points > kMaxExactW2Points)
      throw ParseError(o.at("w2_points"), "must lie in [1, " + std::to_string(kMaxExactW2Points) + "]");
    if (mc.w2_replicates < 1) throw ParseError(o.at("w2_replicates"), "must be positive");
    if (sc.l1) {
      const double h = sc.delta_t / sc.substeps, ratio = sc.l1->t_s / h;
      if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1.0)
        throw ParseError(o.at("substeps"), "the substep delta_t / substeps must divide l1drac.t_s");
    }
  }

  if (root.has("certificate")) {
    Object o = root.object("certificate");
    sc.certificate = read_certificate(o, sc);
    sc.lyapunov_q = o.has("lyapunov_q") ? square(o, "lyapunov_q", n) : MatrixXd::Identity(n, n);
    o.finish();
  }
  if (root.has("ambiguity")) {
    Object o = root.object("ambiguity");
    sc.rho_override = o.number("rho");
    o.finish();
    if (*sc.rho_override < 0.0) throw ParseError(o.at("rho"), "must be nonnegative");
  }
  if (!sc.rho_override && !(sc.certificate && sc.l1))
    throw ParseError("ambiguity", "give ambiguity.rho, or certificate inputs together with l1drac parameters");

  if (root.has("planner")) {
    Object o = root.object("planner");
    sc.big_m = o.number("big_m", 0.0);
    sc.bnb.gap_tol = o.number("gap_tol", sc.bnb.gap_tol);
    sc.bnb.max_nodes = static_cast<int>(o.integer("max_nodes", sc.bnb.max_nodes));
    o.finish();
    if (sc.big_m < 0.0) throw ParseError(o.at("big_m"), "must be nonnegative");
    if (!(sc.bnb.gap_tol >= 0.0)) throw ParseError(o.at("gap_tol"), "must be nonnegative");
    if (sc.bnb.max_nodes < 1) throw ParseError(o.at("max_nodes"), "must be positive");
  }

  if (root.has("render")) {
    Object o = root.object("render");
    const json& p = o.array("projection");
    if (p.size() != 2) throw ParseError(o.at("projection"), "expected two state indices");
    for (int i = 0; i < 2; ++i) {
      const long v = Object::as_integer(p[i], o.at("projection"));
      if (v < 0 || v >= n) throw ParseError(o.at("projection"), "index out of range");
      sc.projection[i] = static_cast<int>(v);
    }
    if (sc.projection[0] == sc.projection[1]) throw ParseError(o.at("projection"), "indices must differ");
    o.finish();
  }
  root.finish();

  if (sc.certificate && sc.l1) {
    // Surface certificate problems at load time rather than in the middle of a run.
    try {
      sc.certified_rho();
    } catch (const std::invalid_argument& e) {
      throw ParseError("certificate", e.what());
    }
  }
  check("planner", [&] { sc.planner_problem().validate(); });
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::optional<RhoBreakdown> Scenario::certified_rho() const {
  if (!certificate || !l1) return std::nullopt;
  const LyapunovCert cert = LyapunovCert::from_q(model.a_mu, lyapunov_q);
  return compute_rho(*certificate, cert, *l1);
}

double Scenario::rho() const {
  if (rho_override) return *rho_override;
  const auto r = certified_rho();
  if (!r) throw std::invalid_argument("scenario has neither an ambiguity radius nor certificate inputs");
  return r->rho;
}

PlannerProblem Scenario::planner_problem() const {
  PlannerProblem p;
  p.dm = discretize(model, delta_t, k_prime);
  p.q = q;
  p.q_terminal = q_terminal;
  p.r = r;
  p.boundary = boundary;
  p.safe_set = safe_set;
  p.delta_s = delta_s;
  p.rho = rho();
  p.big_m = big_m;
  p.bnb = bnb;
  return p;
}

}  // namespace drcs
