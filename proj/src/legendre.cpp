#include "surfpinn/legendre.hpp"

#include <cmath>
#include <numbers>

#include "surfpinn/error.hpp"

namespace surfpinn {

LegendreValue legendre(int n, double x) {
  double p0 = 1.0;
  if (n == 0) return {1.0, 0.0};
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1); nodes never sit at +-1.
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

GaussLegendreRule gauss_legendre_rule(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidCount, "Gauss-Legendre rule needs n >= 1");
  GaussLegendreRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    // Chebyshev-like initial guess for the (i+1)-th largest root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [p, dp] = legendre(n, x);
    (void)p;
    rule.nodes(n - 1 - i) = x;
    rule.weights(n - 1 - i) = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace surfpinn
