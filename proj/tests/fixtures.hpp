#pragma once

#include "drcs/planner.hpp"

namespace drcs::fixtures {

inline HalfSpace face(double a, double b, double d) {
  VectorXd c = VectorXd::Zero(4);
  c[0] = a;
  c[1] = b;
  return {c, d};
}

inline SystemModel double_integrator(double sigma) {
  SystemModel s;
  s.a_mu = MatrixXd::Zero(4, 4);
  s.a_mu.topRightCorner(2, 2) = MatrixXd::Identity(2, 2);
  s.b = MatrixXd::Zero(4, 2);
  s.b.bottomRows(2) = MatrixXd::Identity(2, 2);
  MatrixXd k(2, 4);
  k << -1, 0, -1.8, 0, 0, -1, 0, -1.8;
  s.a_mu += s.b * k;
  s.a_sigma = MatrixXd::Zero(4, 4);
  s.a_sigma(2, 2) = sigma;
  s.a_sigma(3, 3) = sigma;
  return s;
}

// L-shaped corridor: a vertical strip left of x = -1 and a horizontal strip below y = -1.
inline PlannerProblem corridor(int kp, double rho) {
  PlannerProblem p;
  p.dm = discretize(double_integrator(0.02), 2.0 / kp, kp);
  p.q = 0.1 * MatrixXd::Identity(4, 4);
  p.r = MatrixXd::Identity(2, 2);
  p.boundary.mu0 = (VectorXd(4) << -3, 3, 0, 0).finished();
  p.boundary.mu_t = (VectorXd(4) << 3, -3, 0, 0).finished();
  p.boundary.sigma0 = 1e-4 * MatrixXd::Identity(4, 4);
  p.boundary.sigma_t = 4e-4 * MatrixXd::Identity(4, 4);
  p.safe_set.regions = {ConvexRegion{{face(1, 0, -1), face(0, 1, 4), face(0, -1, 4)}, {}},
                        ConvexRegion{{face(0, 1, -1), face(1, 0, 4), face(-1, 0, 4)}, {}}};
  p.delta_s = 0.05;
  p.rho = rho;
  return p;
}

}  // namespace drcs::fixtures
