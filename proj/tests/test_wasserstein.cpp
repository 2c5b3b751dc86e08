#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

#include "drcs/wasserstein.hpp"
#include "oracles.hpp"

using namespace drcs;
using namespace drcs::oracles;

namespace {

// Shortest augmenting paths with potentials (Kuhn-Munkres), optimal assignment cost.
double hungarian_cost(const std::vector<double>& c, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += c[(p[j] - 1) * n + (j - 1)];
  return total;
}

double assignment_cost(const std::vector<double>& c, const std::vector<int>& m) {
  const int n = static_cast<int>(m.size());
  std::vector<char> seen(n, 0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    EXPECT_FALSE(seen[m[i]]) << "column used twice";
    seen[m[i]] = 1;
    total += c[i * n + m[i]];
  }
  return total;
}

}  // namespace

TEST(GaussianW2, IdenticalIsZero) {
  MatrixXd s(2, 2);
  s << 2.0, 0.3, 0.3, 1.0;
  EXPECT_NEAR(gaussian_w2(VectorXd::Ones(2), s, VectorXd::Ones(2), s), 0.0, 1e-7);
}

TEST(GaussianW2, MeanShiftOneDimension) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  EXPECT_NEAR(gaussian_w2(VectorXd::Zero(1), one, VectorXd::Constant(1, 3.0), one), 3.0, 1e-12);
}

TEST(GaussianW2, CommutingCovariances) {
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  EXPECT_NEAR(gaussian_w2(VectorXd::Zero(2), 4.0 * i2, VectorXd::Zero(2), i2), std::sqrt(2.0), 1e-12);
}

TEST(GaussianW2, RejectsIndefiniteCovariance) {
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  EXPECT_THROW(gaussian_w2(VectorXd::Zero(2), bad, VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
               std::invalid_argument);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 7;
    const MatrixXd a = MatrixXd::NullaryExpr(3, n, [&] { return ud(gen); });
    const MatrixXd b = MatrixXd::NullaryExpr(3, n, [&] { return ud(gen); });
    EXPECT_NEAR(empirical_w2(a, b), brute_force_w2(a, b), 1e-12) << trial;
  }
}

TEST(Assignment, IntegerCostTable) {
  // Optimum 0->1, 1->0, 2->2 with cost 1 + 2 + 2 = 5.
  const std::vector<double> c{4, 1, 3, 2, 0, 5, 3, 2, 2};
  const auto m = solve_assignment(c, 3);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += c[i * 3 + m[i]];
  EXPECT_EQ(total, 5.0);
}

TEST(Assignment, MatchesKuhnMunkresOnLargerInstances) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 20 + 40 * trial;
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    // Alternate continuous costs with heavily tied integer costs.
    for (auto& x : c) x = trial % 2 ? ud(gen) : small(gen);
    const double ref = hungarian_cost(c, n);
    EXPECT_NEAR(assignment_cost(c, solve_assignment(c, n)), ref, 1e-9 * (1.0 + ref)) << trial;
  }
}

TEST(Assignment, MatchesKuhnMunkresOnPointClouds) {
  std::mt19937 gen(13);
  for (int n : {50, 200, 400}) {
    const MatrixXd a = gaussian_sample(VectorXd::Zero(2), MatrixXd::Identity(2, 2), n, gen);
    const MatrixXd b = gaussian_sample(VectorXd::Ones(2), 2.0 * MatrixXd::Identity(2, 2), n, gen);
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(i) * n + j] = (a.col(i) - b.col(j)).squaredNorm();
    const double ref = hungarian_cost(c, n);
    EXPECT_NEAR(assignment_cost(c, solve_assignment(c, n)), ref, 1e-9 * ref) << n;
  }
}

TEST(EmpiricalW2, IdenticalSetsAndSingletons) {
  std::mt19937 gen(2);
  const MatrixXd a = gaussian_sample(VectorXd::Zero(3), MatrixXd::Identity(3, 3), 50, gen);
  EXPECT_EQ(empirical_w2(a, a), 0.0);
  const VectorXd p = (VectorXd(2) << 1.0, 2.0).finished(), q = (VectorXd(2) << 4.0, -2.0).finished();
  EXPECT_NEAR(empirical_w2(p, q), 5.0, 1e-15);
}

TEST(EmpiricalW2, RejectsBadInput) {
  EXPECT_THROW(empirical_w2(MatrixXd(2, 0), MatrixXd(2, 0)), std::invalid_argument);
  EXPECT_THROW(empirical_w2(MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 4)), std::invalid_argument);
  EXPECT_THROW(empirical_w2(MatrixXd::Zero(2, 3), MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST(EmpiricalW2, SymmetryAndTriangleInequality) {
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> size(1, 64);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = size(gen);
    const MatrixXd a = gaussian_sample(VectorXd::Zero(2), MatrixXd::Identity(2, 2), n, gen);
    const MatrixXd b = gaussian_sample(VectorXd::Ones(2), 2.0 * MatrixXd::Identity(2, 2), n, gen);
    const MatrixXd c = gaussian_sample(-VectorXd::Ones(2), 0.5 * MatrixXd::Identity(2, 2), n, gen);
    const double ab = empirical_w2(a, b), bc = empirical_w2(b, c), ac = empirical_w2(a, c);
    EXPECT_EQ(ab, empirical_w2(b, a));
    EXPECT_LE(ac, ab + bc + 1e-9);
    EXPECT_LE(ab, ac + bc + 1e-9);
    EXPECT_LE(bc, ab + ac + 1e-9);
  }
}

namespace {

void expect_close_to_closed_form(int n, double tol) {
  const VectorXd m1 = VectorXd::Zero(2), m2 = (VectorXd(2) << 1.0, 0.5).finished();
  MatrixXd s1(2, 2), s2(2, 2);
  s1 << 1.0, 0.3, 0.3, 0.5;
  s2 << 2.0, -0.4, -0.4, 1.0;
  const double exact = gaussian_w2(m1, s1, m2, s2);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937 gen(seed);
    const double w = empirical_w2(gaussian_sample(m1, s1, n, gen), gaussian_sample(m2, s2, n, gen));
    EXPECT_LE(std::abs(w - exact), tol * exact) << "seed " << seed;
  }
}

}  // namespace

TEST(EmpiricalW2, ConvergesToClosedForm) { expect_close_to_closed_form(2000, 0.10); }

TEST(EmpiricalW2, ConvergesToClosedFormAtFourThousandPoints) { expect_close_to_closed_form(4000, 0.05); }
