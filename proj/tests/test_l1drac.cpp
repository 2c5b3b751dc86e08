#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drcs/l1drac.hpp"

using namespace drcs;

namespace {

MatrixXd col(double a, double b) {
  MatrixXd m(2, 1);
  m << a, b;
  return m;
}

// Stable second-order plant with the input on the velocity channel.
SystemModel damped_oscillator(double noise) {
  SystemModel s;
  s.a_mu.resize(2, 2);
  s.a_mu << 0, 1, -2, -3;
  s.b = col(0, 1);
  s.a_sigma = col(0, noise);
  return s;
}

UncertaintyFunctions constant_drift(double h) {
  return {[h](const VectorXd&) { return VectorXd::Constant(1, h); },
          [](const VectorXd&) { return MatrixXd::Zero(1, 1); }};
}

}  // namespace

TEST(ThetaAd, RecoversIdentityOnInputRange) {
  const MatrixXd b = col(0, 1);
  EXPECT_NEAR((build_theta_ad(b) * b)(0, 0), 1.0, 1e-15);
  EXPECT_TRUE(build_theta_ad(MatrixXd::Identity(3, 3)).isApprox(MatrixXd::Identity(3, 3), 1e-14));
  std::mt19937 gen(2);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const MatrixXd r = MatrixXd::NullaryExpr(4, 2, [&] { return nd(gen); });
    EXPECT_LE((build_theta_ad(r) * r - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  }
  MatrixXd deficient(3, 2);
  deficient << 1, 2, 2, 4, 0, 0;
  EXPECT_THROW(build_theta_ad(deficient), std::invalid_argument);
}

TEST(Adaptation, GainAndZeroInput) {
  const ControlParams p{10.0, 0.01, 1.0};
  EXPECT_NEAR(adaptation_gain(p), 1.0 / (1.0 - std::exp(0.01)), 1e-12);
  EXPECT_NEAR(adaptation_gain(p), -99.50, 5e-3);
  const MatrixXd theta = MatrixXd::Identity(2, 2);
  EXPECT_EQ(adaptation_update(VectorXd::Zero(2), p, theta), VectorXd::Zero(2));
  const VectorXd e1 = VectorXd::Unit(2, 0);
  EXPECT_NEAR(adaptation_update(e1, p, theta)[0], adaptation_gain(p), 1e-15);
}

TEST(Filter, ZeroInputStaysZero) {
  VectorXd u = VectorXd::Zero(2);
  for (int i = 0; i < 100; ++i) u = filter_step(u, VectorXd::Zero(2), 7.0, 0.01);
  EXPECT_EQ(u, VectorXd::Zero(2));
  EXPECT_THROW(filter_step(u, u, 7.0, 0.0), std::invalid_argument);
}

TEST(Filter, ConvergesToNegatedEstimateAtRateOmega) {
  const double omega = 3.0, dt = 0.005;
  VectorXd v(2);
  v << 0.7, -1.2;
  VectorXd u = VectorXd::Zero(2);
  for (int k = 1; k <= 2000; ++k) {
    u = filter_step(u, v, omega, dt);
    const VectorXd closed = -(1.0 - std::exp(-omega * k * dt)) * v;
    ASSERT_LE((u - closed).norm(), 1e-12) << k;
  }
  EXPECT_LE((u + v).norm(), 1e-4);
}

TEST(Filter, MatchesSimpsonConvolution) {
  // u(t) = e^{-w t} u0 - w * int_0^t e^{-w (t - s)} lambda(s) ds with lambda piecewise constant.
  const double omega = 10.0, dt = 0.001, u0 = 0.3;
  const int steps = 400, sub = 64;
  auto lam = [](int k) { return std::sin(0.05 * k) + 0.2 * (k % 7); };
  VectorXd u = VectorXd::Constant(1, u0);
  double max_err = 0.0;
  for (int k = 1; k <= steps; ++k) {
    u = filter_step(u, VectorXd::Constant(1, lam(k - 1)), omega, dt);
    const double t = k * dt;
    double integral = 0.0;
    for (int j = 0; j < k; ++j) {
      const double a = j * dt, h = dt / sub;
      double acc = 0.0;
      for (int i = 0; i <= sub; ++i) {
        const double w = (i == 0 || i == sub) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::exp(-omega * (t - (a + i * h)));
      }
      integral += lam(j) * acc * h / 3.0;
    }
    const double oracle = std::exp(-omega * t) * u0 - omega * integral;
    max_err = std::max(max_err, std::abs(u[0] - oracle));
  }
  EXPECT_LE(max_err, 1e-8);
}

TEST(Predictor, TracksDeterministicPlantExactly) {
  const auto s = damped_oscillator(0.0);
  VectorXd x(2), xh(2);
  x << 1.0, -0.5;
  xh = x;
  const VectorXd u = VectorXd::Constant(1, 0.4), zero = VectorXd::Zero(1);
  for (int i = 0; i < 500; ++i) {
    xh = predictor_step(xh, x, s, u, zero, zero, 5.0, 0.002);
    x = x + 0.002 * (s.a_mu * x + s.b * u);
    ASSERT_LE((xh - x).norm(), 1e-14);
  }
  EXPECT_THROW(predictor_step(xh, x, s, u, zero, zero, 5.0, -1.0), std::invalid_argument);
}

TEST(Predictor, OneStepContraction) {
  const auto s = damped_oscillator(0.0);
  const VectorXd zero2 = VectorXd::Zero(2), zero1 = VectorXd::Zero(1);
  VectorXd xt(2);
  xt << 0.3, -0.8;
  for (double lam : {10.0, 100.0, 400.0}) {
    const double dt = 1e-3;
    const VectorXd next = predictor_step(xt, zero2, s, zero1, zero1, zero1, lam, dt);
    EXPECT_TRUE(next.isApprox((1.0 - lam * dt) * xt, 1e-14));
  }
}

TEST(Predictor, FixedPointUnderConstantDisturbance) {
  // Plant held at its equilibrium under disturbance h: A x + B (u + h) = 0.
  // The predictor error then settles where lambda x_tilde = B lambda_hat - B h.
  const auto s = damped_oscillator(0.0);
  const VectorXd u = VectorXd::Constant(1, 0.25), h = VectorXd::Constant(1, -0.6);
  const VectorXd lam_hat = VectorXd::Constant(1, 0.4), zero = VectorXd::Zero(1);
  const VectorXd x = -s.a_mu.inverse() * s.b * (u + h);
  const double lambda_s = 8.0;
  VectorXd xh = VectorXd::Zero(2);
  for (int i = 0; i < 20000; ++i) xh = predictor_step(xh, x, s, u, zero, lam_hat, lambda_s, 1e-3);
  const VectorXd lhs = lambda_s * (xh - x);
  const VectorXd rhs = s.b * lam_hat - s.b * h;
  EXPECT_LE((lhs - rhs).norm(), 1e-9);
}

TEST(Conditions, SlacksAndMonotonicity) {
  RhoCertificateInputs in;
  in.beta1 = 1.0;
  in.beta2 = 1.0;
  auto c = verify_parameter_conditions({4.0, 0.01, 1.0}, in);
  EXPECT_TRUE(c.ok);
  EXPECT_NEAR(c.slack1, 0.5, 1e-15);
  in.beta2 = 0.1;
  c = verify_parameter_conditions({4.0, 0.04, 1.0}, in);
  EXPECT_FALSE(c.ok);
  EXPECT_NEAR(c.slack2, 0.1 - 0.2, 1e-15);
  EXPECT_FALSE(c.message.empty());
  double prev = -INFINITY;
  for (double w : {1.0, 2.0, 10.0, 100.0}) {
    const double s1 = verify_parameter_conditions({w, 0.01, 1.0}, in).slack1;
    EXPECT_GT(s1, prev);
    prev = s1;
  }
}

TEST(Rho, Composition) {
  const auto cert = LyapunovCert::from_q(-MatrixXd::Identity(2, 2), 2.0 * MatrixXd::Identity(2, 2));
  EXPECT_NEAR(cert.alpha1, 1.0, 1e-12);
  EXPECT_NEAR(cert.alpha2, 1.0, 1e-12);
  RhoCertificateInputs in;
  in.beta1 = in.beta2 = 1.0;
  in.epsilon = 0.1;
  in.delta_a_sigma = 0.3;
  in.rho_a = 0.2;
  const ControlParams p{100.0, 0.001, 1.0};
  auto r = compute_rho(in, cert, p);
  EXPECT_NEAR(r.rho_r, 0.4, 1e-15);
  EXPECT_NEAR(r.rho, 0.9, 1e-15);
  in.rho_inflation = 0.05;
  EXPECT_NEAR(compute_rho(in, cert, p).rho, 0.95, 1e-15);

  RhoCertificateInputs tiny;
  tiny.beta1 = tiny.beta2 = 1.0;
  tiny.epsilon = tiny.rho_a = 1e-12;
  EXPECT_LE(compute_rho(tiny, cert, p).rho, 1e-11);

  LyapunovCert skewed;
  skewed.alpha1 = 1.0;
  skewed.alpha2 = 4.0;
  RhoCertificateInputs gap;
  gap.beta1 = gap.beta2 = 1.0;
  gap.init_gap = 0.5;
  EXPECT_NEAR(compute_rho(gap, skewed, p).rho_r, 1.0, 1e-15);

  gap.beta2 = 0.01;
  EXPECT_THROW(compute_rho(gap, skewed, {100.0, 0.04, 1.0}), std::invalid_argument);
}

TEST(Lyapunov, CertificateSatisfiesEquation) {
  MatrixXd a(3, 3);
  a << -1, 2, 0, -0.5, -2, 1, 0, 0.3, -1.5;
  MatrixXd q = MatrixXd::Identity(3, 3);
  q(0, 1) = q(1, 0) = 0.2;
  const auto c = LyapunovCert::from_q(a, q);
  EXPECT_LE((a.transpose() * c.p + c.p * a + q).cwiseAbs().maxCoeff(), 1e-8);
  std::mt19937 gen(8);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const VectorXd x = VectorXd::NullaryExpr(3, [&] { return nd(gen); });
    const double v = x.dot(c.p * x), n2 = x.squaredNorm();
    EXPECT_GE(v, c.alpha1 * n2 * (1 - 1e-12));
    EXPECT_LE(v, c.alpha2 * n2 * (1 + 1e-12));
  }
}

TEST(Loop, NoUncertaintyLeavesCorrectionIdle) {
  const auto s = damped_oscillator(0.0);
  const std::vector<VectorXd> u(10, VectorXd::Constant(1, 0.5));
  VectorXd x0(2);
  x0 << 1.0, 0.0;
  const auto path = run_l1drac_loop(s, UncertaintyFunctions::none(1, 1), u, 0.1, {20.0, 0.01, 5.0}, x0, 0.001, 7);
  for (const auto& v : path.u_l1) EXPECT_LE(v.norm(), 1e-6);
}

TEST(Loop, EstimateHeldBetweenSamplesAndZeroInitially) {
  const auto s = damped_oscillator(0.05);
  const std::vector<VectorXd> u(5, VectorXd::Zero(1));
  const ControlParams p{20.0, 0.01, 5.0};
  const double h = 0.002;
  const auto path = run_l1drac_loop(s, constant_drift(1.0), u, 0.1, p, VectorXd::Zero(2), h, 3);
  const int per = 5;
  for (std::size_t i = 0; i + 1 < path.t.size(); ++i) {
    if (i < static_cast<std::size_t>(per)) EXPECT_EQ(path.lambda_hat[i][0], 0.0) << i;
    if (i % per != 0) EXPECT_EQ(path.lambda_hat[i][0], path.lambda_hat[i - 1][0]) << i;
  }
  EXPECT_NE(path.lambda_hat[per][0], 0.0);
}

TEST(Loop, SeedDeterminism) {
  const auto s = damped_oscillator(0.2);
  const std::vector<VectorXd> u(8, VectorXd::Constant(1, 0.1));
  const ControlParams p{30.0, 0.01, 5.0};
  const auto a = run_l1drac_loop(s, constant_drift(0.5), u, 0.1, p, VectorXd::Zero(2), 0.001, 99);
  const auto b = run_l1drac_loop(s, constant_drift(0.5), u, 0.1, p, VectorXd::Zero(2), 0.001, 99);
  const auto c = run_l1drac_loop(s, constant_drift(0.5), u, 0.1, p, VectorXd::Zero(2), 0.001, 100);
  ASSERT_EQ(a.x.size(), b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    ASSERT_EQ(a.x[i], b.x[i]);
    ASSERT_EQ(a.u_l1[i], b.u_l1[i]);
  }
  EXPECT_NE(a.x.back(), c.x.back());
}

TEST(Loop, RejectsMisalignedSubstep) {
  const auto s = damped_oscillator(0.0);
  const std::vector<VectorXd> u(2, VectorXd::Zero(1));
  EXPECT_THROW(run_l1drac_loop(s, constant_drift(0.0), u, 0.1, {20.0, 0.01, 5.0}, VectorXd::Zero(2), 0.003, 1),
               std::invalid_argument);
}

TEST(Loop, MatchedDisturbanceRejectionImprovesWithBandwidth) {
  // Mean deviation from the disturbance-free nominal loop at the final time, over a few seeds.
  const auto s = damped_oscillator(0.05);
  const std::vector<VectorXd> u(30, VectorXd::Constant(1, 0.2));
  const int paths = 16;
  auto final_gap = [&](double omega, bool with_l1) {
    VectorXd acc = VectorXd::Zero(2);
    for (int k = 0; k < paths; ++k) {
      const auto nom = run_l1drac_loop(s, UncertaintyFunctions::none(1, 1), u, 0.1, {omega, 0.01, 10.0},
                                       VectorXd::Zero(2), 0.001, 500 + k, false);
      const auto tru = run_l1drac_loop(s, constant_drift(1.0), u, 0.1, {omega, 0.01, 10.0}, VectorXd::Zero(2),
                                       0.001, 500 + k, with_l1);
      acc += tru.x.back() - nom.x.back();
    }
    return (acc / paths).norm();
  };
  const double open = final_gap(5.0, false);
  const double w5 = final_gap(5.0, true), w20 = final_gap(20.0, true), w80 = final_gap(80.0, true);
  EXPECT_LT(w5, open);
  EXPECT_LT(w20, w5);
  EXPECT_LT(w80, w20);
  EXPECT_LT(w80, 0.1 * open);
}
