#pragma once

#include <Eigen/Dense>

namespace surfpinn {

/// Legendre polynomial P_n and its derivative at x via the three-term recurrence.
struct LegendreValue {
  double value;
  double derivative;
};

LegendreValue legendre(int n, double x);

/// Gauss-Legendre nodes (increasing) and weights on [-1, 1].
struct GaussLegendreRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GaussLegendreRule gauss_legendre_rule(int n);

}  // namespace surfpinn
