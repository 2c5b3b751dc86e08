#include "drcs/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace drcs {

namespace {

using Point = Eigen::Vector2d;

constexpr double kWidth = 640, kHeight = 480, kPad = 48;
const char* const kRegionColors[] = {"#4c72b0", "#55a868", "#c44e52", "#8172b2", "#ccb974", "#64b5cd"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  void add(const Point& p) {
    x0 = std::min(x0, p.x());
    x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y());
    y1 = std::max(y1, p.y());
  }
  void grow(double frac) {
    const double dx = std::max(x1 - x0, 1e-9) * frac, dy = std::max(y1 - y0, 1e-9) * frac;
    x0 -= dx;
    x1 += dx;
    y0 -= dy;
    y1 += dy;
  }
};

// Maps data coordinates to the plot area, equal scale on both axes.
struct Frame {
  Box box;
  double scale = 1.0, ox = 0.0, oy = 0.0;
  explicit Frame(const Box& b) : box(b) {
    scale = std::min((kWidth - 2 * kPad) / (b.x1 - b.x0), (kHeight - 2 * kPad) / (b.y1 - b.y0));
    ox = kPad + 0.5 * ((kWidth - 2 * kPad) - scale * (b.x1 - b.x0));
    oy = kPad + 0.5 * ((kHeight - 2 * kPad) - scale * (b.y1 - b.y0));
  }
  double sx(double x) const { return ox + scale * (x - box.x0); }
  double sy(double y) const { return kHeight - (oy + scale * (y - box.y0)); }
  std::string xy(const Point& p) const { return fmt(sx(p.x())) + "," + fmt(sy(p.y())); }
};

// Clips a convex polygon against a.x <= b.
std::vector<Point> clip(const std::vector<Point>& poly, const Point& a, double b) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    const double fp = a.dot(p) - b, fq = a.dot(q) - b;
    if (fp <= 0) out.push_back(p);
    if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) out.push_back(p + (q - p) * (fp / (fp - fq)));
  }
  return out;
}

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
     << "<title>" << title << "</title>\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

void check_projection(const RunReport& r) {
  const int n = r.sim.steps.empty() ? 0 : static_cast<int>(r.sim.steps.front().planned_mean.size());
  for (int i : r.projection)
    if (i < 0 || i >= n) throw std::invalid_argument("projection index " + std::to_string(i) + " out of range");
  if (r.projection[0] == r.projection[1]) throw std::invalid_argument("projection indices must differ");
}

}  // namespace

std::string render_fan_svg(const RunReport& r) {
  if (r.fan.empty() || r.sim.steps.empty()) throw std::invalid_argument("render: empty ensemble");
  check_projection(r);
  const int px = r.projection[0], py = r.projection[1];

  Box box;
  for (const auto& p : r.fan)
    for (Eigen::Index k = 0; k < p.cols(); ++k) box.add(p.col(k));
  for (const auto& s : r.sim.steps) box.add({s.planned_mean[px], s.planned_mean[py]});
  box.grow(0.15);
  const Frame f(box);

  std::ostringstream os;
  os << header("Projected trajectories");
  // Regions: intersect the view box with each drawable face.
  for (std::size_t j = 0; j < r.safe_set.regions.size(); ++j) {
    std::vector<Point> poly{{box.x0, box.y0}, {box.x1, box.y0}, {box.x1, box.y1}, {box.x0, box.y1}};
    for (const auto& face : r.safe_set.regions[j].faces) {
      VectorXd rest = face.c;
      rest[px] = rest[py] = 0.0;
      if (rest.norm() > 1e-12 * face.c.norm()) continue;
      poly = clip(poly, {face.c[px], face.c[py]}, face.d);
      if (poly.empty()) break;
    }
    if (poly.size() < 3) continue;
    os << "<polygon fill=\"" << kRegionColors[j % 6] << "\" fill-opacity=\"0.12\" stroke=\"" << kRegionColors[j % 6]
       << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : poly) os << f.xy(p) << " ";
    os << "\"/>\n";
  }
  for (const auto& p : r.fan) {
    os << "<polyline fill=\"none\" stroke=\"#555555\" stroke-opacity=\"0.35\" stroke-width=\"0.8\" points=\"";
    for (Eigen::Index k = 0; k < p.cols(); ++k) os << f.xy(p.col(k)) << " ";
    os << "\"/>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"";
  for (const auto& s : r.sim.steps) os << f.xy({s.planned_mean[px], s.planned_mean[py]}) << " ";
  os << "\"/>\n";
  for (const auto& s : r.sim.steps) {
    Eigen::Matrix2d c;
    c << s.planned_cov(px, px), s.planned_cov(px, py), s.planned_cov(py, px), s.planned_cov(py, py);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
    const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::Vector2d axis = es.eigenvectors().col(1);
    const double angle = -std::atan2(axis.y(), axis.x()) * 180.0 / std::numbers::pi;
    os << "<ellipse fill=\"none\" stroke=\"#dd8452\" stroke-width=\"1\" cx=\"" << fmt(f.sx(s.planned_mean[px]))
       << "\" cy=\"" << fmt(f.sy(s.planned_mean[py])) << "\" rx=\"" << fmt(2 * std::sqrt(ev[1]) * f.scale)
       << "\" ry=\"" << fmt(2 * std::sqrt(ev[0]) * f.scale) << "\" transform=\"rotate(" << fmt(angle) << " "
       << fmt(f.sx(s.planned_mean[px])) << " " << fmt(f.sy(s.planned_mean[py])) << ")\"/>\n";
  }
  os << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">x" << px << " vs x" << py
     << ": " << r.fan.size() << " true paths, planned mean and 2-sigma ellipses</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string render_w2_svg(const RunReport& r) {
  if (r.sim.steps.empty()) throw std::invalid_argument("render: empty report");
  const auto& steps = r.sim.steps;
  double top = r.sim.rho;
  for (const auto& s : steps) top = std::max(top, s.w2_true_nominal.value + 2 * s.w2_true_nominal.standard_error);
  top = top > 0.0 ? 1.1 * top : 1.0;
  const double t_end = std::max(steps.back().t, 1e-9);
  auto sx = [&](double t) { return kPad + (kWidth - 2 * kPad) * t / t_end; };
  auto sy = [&](double w) { return kHeight - kPad - (kHeight - 2 * kPad) * w / top; };

  std::ostringstream os;
  os << header("Empirical W2 per step");
  os << "<line stroke=\"black\" x1=\"" << kPad << "\" y1=\"" << fmt(sy(0)) << "\" x2=\"" << kWidth - kPad << "\" y2=\""
     << fmt(sy(0)) << "\"/>\n";
  os << "<line stroke=\"black\" x1=\"" << kPad << "\" y1=\"" << fmt(sy(0)) << "\" x2=\"" << kPad << "\" y2=\""
     << fmt(sy(top)) << "\"/>\n";
  os << "<line stroke=\"#c44e52\" stroke-dasharray=\"6,4\" x1=\"" << kPad << "\" y1=\"" << fmt(sy(r.sim.rho))
     << "\" x2=\"" << kWidth - kPad << "\" y2=\"" << fmt(sy(r.sim.rho)) << "\"/>\n";
  os << "<text x=\"" << kWidth - kPad - 60 << "\" y=\"" << fmt(sy(r.sim.rho) - 6)
     << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#c44e52\">rho = " << r.sim.rho << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\" points=\"";
  for (const auto& s : steps) os << fmt(sx(s.t)) << "," << fmt(sy(s.w2_true_nominal.value)) << " ";
  os << "\"/>\n";
  for (const auto& s : steps) {
    const double lo = std::max(0.0, s.w2_true_nominal.value - 2 * s.w2_true_nominal.standard_error);
    const double hi = s.w2_true_nominal.value + 2 * s.w2_true_nominal.standard_error;
    os << "<line stroke=\"#4c72b0\" x1=\"" << fmt(sx(s.t)) << "\" y1=\"" << fmt(sy(lo)) << "\" x2=\"" << fmt(sx(s.t))
       << "\" y2=\"" << fmt(sy(hi)) << "\"/>\n";
    os << "<circle fill=\"#4c72b0\" r=\"3\" cx=\"" << fmt(sx(s.t)) << "\" cy=\"" << fmt(sy(s.w2_true_nominal.value))
       << "\"/>\n";
  }
  os << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">W2(true, nominal) per step, "
     << (r.sim.l1_enabled ? "L1 on" : "L1 off") << ", t from 0 to " << fmt(t_end) << " s, axis top "
     << fmt(top) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace drcs
