#include "surfpinn/irk.hpp"

#include <cmath>
#include <fstream>

#include "surfpinn/error.hpp"
#include "surfpinn/legendre.hpp"
#include "surfpinn/text_io.hpp"

namespace surfpinn {

namespace {

// Barycentric evaluation of the j-th Lagrange basis polynomial on `nodes`.
double lagrange_basis(const Eigen::VectorXd& nodes, const Eigen::VectorXd& bary, Eigen::Index j, double s) {
  double denom = 0.0;
  double term_j = 0.0;
  for (Eigen::Index k = 0; k < nodes.size(); ++k) {
    const double diff = s - nodes(k);
    if (diff == 0.0) return k == j ? 1.0 : 0.0;
    const double term = bary(k) / diff;
    denom += term;
    if (k == j) term_j = term;
  }
  return term_j / denom;
}

Eigen::MatrixXd stage_matrix(const ButcherTableau& t, const Eigen::MatrixXd& system, double dt) {
  const Eigen::Index m = system.rows();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(t.q * m, t.q * m);
  for (int i = 0; i < t.q; ++i)
    for (int j = 0; j < t.q; ++j) lhs.block(i * m, j * m, m, m) -= dt * t.a(i, j) * system;
  return lhs;
}

}  // namespace

ButcherTableau gauss_legendre_tableau(int q) {
  if (q < 1 || q > 32) throw Error(ErrorKind::StageCountUnsupported, "stage count must lie in [1, 32]");
  const GaussLegendreRule rule = gauss_legendre_rule(q);
  ButcherTableau t;
  t.q = q;
  t.c = (rule.nodes.array() + 1.0) / 2.0;
  t.b = rule.weights / 2.0;

  Eigen::VectorXd bary(q);
  for (int k = 0; k < q; ++k) {
    double prod = 1.0;
    for (int m = 0; m < q; ++m)
      if (m != k) prod *= t.c(k) - t.c(m);
    bary(k) = 1.0 / prod;
  }

  // a_ij = integral of l_j over [0, c_i]; the q-point rule is exact for degree q - 1.
  t.a.resize(q, q);
  for (int i = 0; i < q; ++i) {
    const double half = t.c(i) / 2.0;
    for (int j = 0; j < q; ++j) {
      double sum = 0.0;
      for (int k = 0; k < q; ++k)
        sum += rule.weights(k) * lagrange_basis(t.c, bary, j, half * (rule.nodes(k) + 1.0));
      t.a(i, j) = half * sum;
    }
  }
  return t;
}

double order_check(const ButcherTableau& t, int max_order) {
  double worst = 0.0;
  for (int k = 1; k <= max_order; ++k) {
    const double lhs = t.b.dot(t.c.array().pow(k - 1).matrix());
    worst = std::max(worst, std::abs(lhs - 1.0 / k));
  }
  for (int k = 1; k <= t.q; ++k) {
    const Eigen::VectorXd lhs = t.a * t.c.array().pow(k - 1).matrix();
    const Eigen::VectorXd rhs = t.c.array().pow(k) / k;
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::VectorXd ode_integrate(const ButcherTableau& t, const Eigen::MatrixXd& system, const Eigen::VectorXd& u0,
                              double dt, int steps) {
  const Eigen::Index m = system.rows();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(stage_matrix(t, system, dt));
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularStageSystem, "I - dt (a x A) is singular");
  Eigen::VectorXd u = u0;
  Eigen::VectorXd rhs(t.q * m);
  for (int n = 0; n < steps; ++n) {
    const Eigen::VectorXd au = system * u;
    for (int i = 0; i < t.q; ++i) rhs.segment(i * m, m) = au;
    const Eigen::VectorXd k = lu.solve(rhs);
    for (int j = 0; j < t.q; ++j) u += dt * t.b(j) * k.segment(j * m, m);
  }
  return u;
}

double ode_integrate(const ButcherTableau& t, double lambda, double u0, double dt, int steps) {
  return ode_integrate(t, Eigen::MatrixXd::Constant(1, 1, lambda), Eigen::VectorXd::Constant(1, u0), dt, steps)(0);
}

std::complex<double> ode_integrate(const ButcherTableau& t, std::complex<double> lambda, std::complex<double> u0,
                                   double dt, int steps) {
  Eigen::Matrix2d embed;
  embed << lambda.real(), -lambda.imag(), lambda.imag(), lambda.real();
  const Eigen::VectorXd u = ode_integrate(t, Eigen::MatrixXd(embed), Eigen::Vector2d(u0.real(), u0.imag()), dt, steps);
  return {u(0), u(1)};
}

void write_tableau(std::ostream& out, const ButcherTableau& t) {
  out << "surfpinn-tableau 1\nq " << t.q << "\n";
  write_vector(out, "c", t.c);
  write_vector(out, "b", t.b);
  write_vector(out, "a", t.a.reshaped<Eigen::RowMajor>());
}

ButcherTableau read_tableau(std::istream& in) {
  expect_token(in, "surfpinn-tableau");
  if (read_value<int>(in, "format version") != 1) throw Error(ErrorKind::ParseError, "unsupported tableau version");
  expect_token(in, "q");
  ButcherTableau t;
  t.q = read_value<int>(in, "stage count");
  t.c = read_vector(in, "c");
  t.b = read_vector(in, "b");
  const Eigen::VectorXd a = read_vector(in, "a");
  if (t.q < 1 || t.c.size() != t.q || t.b.size() != t.q || a.size() != t.q * t.q)
    throw Error(ErrorKind::ParseError, "tableau sizes are inconsistent");
  t.a = a.reshaped<Eigen::RowMajor>(t.q, t.q);
  return t;
}

void save_tableau(const std::filesystem::path& path, const ButcherTableau& t) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  write_tableau(out, t);
}

ButcherTableau load_tableau(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read " + path.string());
  return read_tableau(in);
}

}  // namespace surfpinn
