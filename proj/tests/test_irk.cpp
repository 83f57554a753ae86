#include <cmath>
#include <complex>
#include <sstream>

#include <gtest/gtest.h>

#include "surfpinn/error.hpp"
#include "surfpinn/irk.hpp"

using namespace surfpinn;

namespace {

// Least-squares slope of log(error) against log(dt).
double convergence_slope(const ButcherTableau& t, double lambda, const std::vector<int>& step_counts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int n : step_counts) {
    const double dt = 1.0 / n;
    const double err = std::abs(ode_integrate(t, lambda, 1.0, dt, n) - std::exp(lambda));
    const double x = std::log(dt), y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(step_counts.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST(Tableau, MidpointRule) {
  const auto t = gauss_legendre_tableau(1);
  EXPECT_EQ(t.q, 1);
  EXPECT_NEAR(t.c(0), 0.5, 1e-16);
  EXPECT_NEAR(t.b(0), 1.0, 1e-16);
  EXPECT_NEAR(t.a(0, 0), 0.5, 1e-16);
}

TEST(Tableau, TwoStageValues) {
  const auto t = gauss_legendre_tableau(2);
  const double r = std::sqrt(3.0) / 6.0;
  EXPECT_NEAR(t.c(0), 0.5 - r, 1e-15);
  EXPECT_NEAR(t.c(1), 0.5 + r, 1e-15);
  EXPECT_NEAR(t.b(0), 0.5, 1e-15);
  EXPECT_NEAR(t.b(1), 0.5, 1e-15);
  EXPECT_NEAR(t.a(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(t.a(0, 1), 0.25 - r, 1e-15);
  EXPECT_NEAR(t.a(1, 0), 0.25 + r, 1e-15);
  EXPECT_NEAR(t.a(1, 1), 0.25, 1e-15);
}

TEST(Tableau, OrderConditions) {
  EXPECT_LE(order_check(gauss_legendre_tableau(1), 2), 1e-15);
  EXPECT_LE(order_check(gauss_legendre_tableau(2), 4), 1e-13);
  for (int q : {1, 2, 4, 8, 16}) {
    EXPECT_LE(order_check(gauss_legendre_tableau(q), 2 * q), 1e-12) << "q = " << q;
  }
}

TEST(Tableau, OrderCheckDetectsCorruption) {
  auto t = gauss_legendre_tableau(2);
  t.b(0) += 1e-3;
  EXPECT_GE(order_check(t, 4), 9e-4);
}

TEST(Tableau, InvariantsForEveryStageCount) {
  for (int q = 1; q <= 32; ++q) {
    const auto t = gauss_legendre_tableau(q);
    EXPECT_NEAR(t.b.sum(), 1.0, 1e-13) << "q = " << q;
    EXPECT_LE((t.a.rowwise().sum() - t.c).cwiseAbs().maxCoeff(), 1e-13) << "q = " << q;
    for (int j = 0; j + 1 < q; ++j) EXPECT_LT(t.c(j), t.c(j + 1));
    EXPECT_GT(t.c(0), 0.0);
    EXPECT_LT(t.c(q - 1), 1.0);
    for (int j = 0; j < q; ++j) {
      EXPECT_NEAR(t.c(j) + t.c(q - 1 - j), 1.0, 1e-13);
      EXPECT_NEAR(t.b(j), t.b(q - 1 - j), 1e-13);
    }
  }
}

TEST(Tableau, StageCountLimits) {
  for (int q : {0, -1, 33}) {
    try {
      gauss_legendre_tableau(q);
      FAIL() << "expected StageCountUnsupported for q = " << q;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::StageCountUnsupported);
    }
  }
}

TEST(Tableau, CacheRoundTripIsBitExact) {
  const auto t = gauss_legendre_tableau(8);
  std::stringstream buffer;
  write_tableau(buffer, t);
  const auto back = read_tableau(buffer);
  EXPECT_EQ(back.q, t.q);
  EXPECT_EQ(back.a, t.a);
  EXPECT_EQ(back.b, t.b);
  EXPECT_EQ(back.c, t.c);
}

TEST(Tableau, CacheRejectsGarbage) {
  std::stringstream buffer("surfpinn-tableau 1\nq 2\nc 1\n0.5\n");
  EXPECT_THROW(read_tableau(buffer), Error);
}

TEST(OdeIntegrate, ZeroRateKeepsValue) {
  EXPECT_EQ(ode_integrate(gauss_legendre_tableau(3), 0.0, 1.7, 0.1, 10), 1.7);
}

TEST(OdeIntegrate, HalfStepExponential) {
  // The q-stage Gauss step is the (q, q) Pade approximant of exp; at z = 0.5
  // its defect is -1.276988e-10 for q = 4 and 8.05e-14 for q = 5.
  const double step4 = ode_integrate(gauss_legendre_tableau(4), 1.0, 1.0, 0.5, 1);
  EXPECT_NEAR(step4 - std::exp(0.5), -1.276988008e-10, 1e-15);
  EXPECT_NEAR(ode_integrate(gauss_legendre_tableau(5), 1.0, 1.0, 0.5, 1), std::exp(0.5), 1e-12);
  EXPECT_NEAR(ode_integrate(gauss_legendre_tableau(4), 1.0, 1.0, 0.05, 10), std::exp(0.5), 1e-12);
}

TEST(OdeIntegrate, MidpointHandStep) {
  // One midpoint step: u1 = u0 (1 + z/2) / (1 - z/2).
  const double z = -0.3;
  EXPECT_NEAR(ode_integrate(gauss_legendre_tableau(1), -1.0, 2.0, 0.3, 1), 2.0 * (1 + z / 2) / (1 - z / 2), 1e-15);
}

TEST(OdeIntegrate, ConvergenceOrderTwoStages) {
  const double slope = convergence_slope(gauss_legendre_tableau(2), -1.0, {2, 3, 4, 6, 8, 10, 13, 16, 20});
  EXPECT_NEAR(slope, 4.0, 0.2);
}

TEST(OdeIntegrate, ConvergenceOrderOneStage) {
  const double slope = convergence_slope(gauss_legendre_tableau(1), -1.0, {4, 8, 16, 32, 64});
  EXPECT_NEAR(slope, 2.0, 0.1);
}

TEST(OdeIntegrate, SingularStageSystem) {
  // 1 - dt lambda / 2 = 0.
  try {
    ode_integrate(gauss_legendre_tableau(1), 2.0, 1.0, 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularStageSystem);
  }
}

TEST(OdeIntegrate, ComplexMatchesRealAndOscillation) {
  const auto t = gauss_legendre_tableau(4);
  const auto real = ode_integrate(t, std::complex<double>(-0.7, 0.0), {1.0, 0.0}, 0.2, 5);
  EXPECT_NEAR(real.real(), ode_integrate(t, -0.7, 1.0, 0.2, 5), 1e-15);
  EXPECT_NEAR(real.imag(), 0.0, 1e-15);
  const auto osc = ode_integrate(t, std::complex<double>(0.0, 1.0), {1.0, 0.0}, 0.1, 10);
  EXPECT_NEAR(osc.real(), std::cos(1.0), 1e-13);
  EXPECT_NEAR(osc.imag(), std::sin(1.0), 1e-13);
}

TEST(OdeIntegrate, AStabilityOnLeftHalfPlane) {
  for (int q : {1, 2, 4}) {
    const auto t = gauss_legendre_tableau(q);
    for (double y = -50.0; y <= 50.0; y += 0.5) {
      // Imaginary axis: |R| = 1 for Gauss methods.
      const double on_axis = std::abs(ode_integrate(t, std::complex<double>(0.0, y), {1.0, 0.0}, 1.0, 1));
      EXPECT_LE(on_axis, 1.0 + 1e-12) << "q = " << q << " y = " << y;
      for (double x : {-0.1, -1.0, -10.0, -100.0}) {
        const double r = std::abs(ode_integrate(t, std::complex<double>(x, y), {1.0, 0.0}, 1.0, 1));
        EXPECT_LE(r, 1.0 + 1e-12) << "q = " << q << " z = " << x << "+" << y << "i";
      }
    }
  }
}

TEST(OdeIntegrate, LinearSystemRotation) {
  Eigen::MatrixXd rot(2, 2);
  rot << 0, -1, 1, 0;
  const Eigen::VectorXd u = ode_integrate(gauss_legendre_tableau(3), rot, Eigen::Vector2d(1, 0), 0.25, 8);
  // Eight order-6 steps: global error about 8 * 9.9e-6 * 0.25^7.
  EXPECT_NEAR(u(0), std::cos(2.0), 1e-8);
  EXPECT_NEAR(u(1), std::sin(2.0), 1e-8);
  EXPECT_NEAR(u.norm(), 1.0, 1e-14);
}
