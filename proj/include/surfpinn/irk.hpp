#pragma once

#include <complex>
#include <filesystem>
#include <iosfwd>

#include <Eigen/Dense>

namespace surfpinn {

/// Implicit Runge-Kutta coefficients: y_{n+1} = y_n + dt sum_j b_j k_j,
/// k_i = f(t_n + c_i dt, y_n + dt sum_j a_ij k_j).
struct ButcherTableau {
  int q = 0;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

/// Gauss-Legendre collocation tableau of order 2q, 1 <= q <= 32.
ButcherTableau gauss_legendre_tableau(int q);

/// Worst residual of B(max_order) and C(q).
double order_check(const ButcherTableau& tableau, int max_order);

/// IRK integration of u' = lambda u with an exact stage solve.
double ode_integrate(const ButcherTableau& tableau, double lambda, double u0, double dt, int steps);
std::complex<double> ode_integrate(const ButcherTableau& tableau, std::complex<double> lambda, std::complex<double> u0,
                                   double dt, int steps);

/// IRK integration of the linear system u' = A u (Kronecker stage system).
Eigen::VectorXd ode_integrate(const ButcherTableau& tableau, const Eigen::MatrixXd& system, const Eigen::VectorXd& u0,
                              double dt, int steps);

void write_tableau(std::ostream& out, const ButcherTableau& tableau);
ButcherTableau read_tableau(std::istream& in);
void save_tableau(const std::filesystem::path& path, const ButcherTableau& tableau);
ButcherTableau load_tableau(const std::filesystem::path& path);

}  // namespace surfpinn
