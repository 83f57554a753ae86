#include "surfpinn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfpinn/error.hpp"
#include "surfpinn/legendre.hpp"

namespace surfpinn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegenerate = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

struct TorusShape {
  double major;
  double minor;
};

TorusShape torus_shape(const SurfaceModel::Kind& kind) {
  if (const auto* t = std::get_if<ImplicitTorus>(&kind)) return {t->major, t->minor};
  const auto& t = std::get<ParametricTorus>(kind);
  return {t.major, t.minor};
}

// Angles (u around the z axis, v around the tube) of a point near a torus.
std::pair<double, double> torus_angles(const TorusShape& torus, const Vec3& x) {
  const double rho = std::hypot(x.x(), x.y());
  return {std::atan2(x.y(), x.x()), std::atan2(x.z(), rho - torus.major)};
}

double wrap_unit(double angle) {
  double s = angle / kTwoPi;
  s -= std::floor(s);
  return s;
}

Vec3 ellipsoid_closest_point(const Vec3& a, const Vec3& p) {
  const Vec3 a2 = a.cwiseProduct(a);
  auto residual = [&](double t, double& derivative) {
    double f = -1.0;
    derivative = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double q = a(i) * p(i) / (a2(i) + t);
      f += q * q;
      derivative -= 2.0 * q * q / (a2(i) + t);
    }
    return f;
  };
  const double pole = -a2.minCoeff();
  double t = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double df = 0.0;
    const double f = residual(t, df);
    if (df == 0.0) break;
    double next = t - f / df;
    if (next <= pole) next = 0.5 * (t + pole);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  Vec3 x;
  for (int i = 0; i < 3; ++i) x(i) = a2(i) * p(i) / (a2(i) + t);
  return x;
}

}  // namespace

SurfaceModel::SurfaceModel(Kind kind) : kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const Sphere& s) {
                   if (!(s.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "sphere radius must be positive");
                 },
                 [](const Ellipsoid& e) {
                   if (!(e.semi_axes.minCoeff() > 0.0))
                     throw Error(ErrorKind::InvalidArgument, "ellipsoid semi-axes must be positive");
                 },
                 [](const auto& t) {
                   if (!(t.minor > 0.0 && t.major > t.minor))
                     throw Error(ErrorKind::InvalidArgument, "torus needs 0 < minor < major");
                 },
             },
             kind_);
}

std::string SurfaceModel::name() const {
  return std::visit(Overloaded{
                        [](const Sphere&) { return std::string("sphere"); },
                        [](const Ellipsoid&) { return std::string("ellipsoid"); },
                        [](const ImplicitTorus&) { return std::string("implicit-torus"); },
                        [](const ParametricTorus&) { return std::string("parametric-torus"); },
                    },
                    kind_);
}

bool SurfaceModel::is_torus() const noexcept {
  return std::holds_alternative<ImplicitTorus>(kind_) || std::holds_alternative<ParametricTorus>(kind_);
}

double SurfaceModel::level(const Vec3& x) const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) return x.squaredNorm() - s->radius * s->radius;
  if (const auto* e = std::get_if<Ellipsoid>(&kind_)) return x.cwiseQuotient(e->semi_axes).squaredNorm() - 1.0;
  const auto t = torus_shape(kind_);
  const double d = std::hypot(x.x(), x.y()) - t.major;
  return d * d + x.z() * x.z() - t.minor * t.minor;
}

Vec3 SurfaceModel::level_gradient(const Vec3& x) const {
  if (std::holds_alternative<Sphere>(kind_)) return 2.0 * x;
  if (const auto* e = std::get_if<Ellipsoid>(&kind_))
    return 2.0 * x.cwiseQuotient(e->semi_axes.cwiseProduct(e->semi_axes));
  const auto t = torus_shape(kind_);
  const double rho = std::hypot(x.x(), x.y());
  if (rho < kDegenerate) return Vec3(0.0, 0.0, 2.0 * x.z());
  const double s = 2.0 * (rho - t.major) / rho;
  return Vec3(s * x.x(), s * x.y(), 2.0 * x.z());
}

Mat3 SurfaceModel::level_hessian(const Vec3& x) const {
  if (std::holds_alternative<Sphere>(kind_)) return 2.0 * Mat3::Identity();
  if (const auto* e = std::get_if<Ellipsoid>(&kind_))
    return Mat3(2.0 * e->semi_axes.cwiseProduct(e->semi_axes).cwiseInverse().asDiagonal());
  const auto t = torus_shape(kind_);
  const double rho = std::hypot(x.x(), x.y());
  const double rho3 = rho * rho * rho;
  Mat3 h = Mat3::Zero();
  h(0, 0) = 2.0 - 2.0 * t.major * (1.0 / rho - x.x() * x.x() / rho3);
  h(1, 1) = 2.0 - 2.0 * t.major * (1.0 / rho - x.y() * x.y() / rho3);
  h(0, 1) = h(1, 0) = 2.0 * t.major * x.x() * x.y() / rho3;
  h(2, 2) = 2.0;
  return h;
}

double SurfaceModel::feature_size() const {
  return std::visit(Overloaded{
                        [](const Sphere& s) { return s.radius; },
                        [](const Ellipsoid& e) { return e.semi_axes.minCoeff(); },
                        [](const auto& t) { return t.minor; },
                    },
                    kind_);
}

bool SurfaceModel::has_chart() const noexcept { return !std::holds_alternative<Ellipsoid>(kind_); }

Vec3 SurfaceModel::chart(double alpha, double beta) const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) {
    const double phi = kTwoPi * alpha;
    const double theta = std::numbers::pi * beta;
    return s->radius * Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
  }
  if (!has_chart()) throw Error(ErrorKind::UnsupportedSurface, name() + " has no chart");
  const auto t = torus_shape(kind_);
  const double u = kTwoPi * alpha;
  const double v = kTwoPi * beta;
  const double rho = t.major + t.minor * std::cos(v);
  return Vec3(rho * std::cos(u), rho * std::sin(u), t.minor * std::sin(v));
}

std::pair<Vec3, Vec3> SurfaceModel::chart_partials(double alpha, double beta) const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) {
    const double phi = kTwoPi * alpha;
    const double theta = std::numbers::pi * beta;
    const Vec3 d_alpha = s->radius * kTwoPi * Vec3(-std::sin(theta) * std::sin(phi), std::sin(theta) * std::cos(phi), 0.0);
    const Vec3 d_beta = s->radius * std::numbers::pi *
                        Vec3(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), -std::sin(theta));
    return {d_alpha, d_beta};
  }
  if (!has_chart()) throw Error(ErrorKind::UnsupportedSurface, name() + " has no chart");
  const auto t = torus_shape(kind_);
  const double u = kTwoPi * alpha;
  const double v = kTwoPi * beta;
  const double rho = t.major + t.minor * std::cos(v);
  const Vec3 d_alpha = kTwoPi * Vec3(-rho * std::sin(u), rho * std::cos(u), 0.0);
  const Vec3 d_beta =
      kTwoPi * Vec3(-t.minor * std::sin(v) * std::cos(u), -t.minor * std::sin(v) * std::sin(u), t.minor * std::cos(v));
  return {d_alpha, d_beta};
}

std::pair<double, double> SurfaceModel::chart_inverse(const Vec3& x) const {
  if (std::holds_alternative<Sphere>(kind_)) {
    const double r = x.norm();
    if (r < kDegenerate) throw Error(ErrorKind::AmbiguousProjection, "sphere chart inverse at the center");
    const double theta = std::acos(std::clamp(x.z() / r, -1.0, 1.0));
    return {wrap_unit(std::atan2(x.y(), x.x())), theta / std::numbers::pi};
  }
  if (!has_chart()) throw Error(ErrorKind::UnsupportedSurface, name() + " has no chart");
  const auto [u, v] = torus_angles(torus_shape(kind_), x);
  return {wrap_unit(u), wrap_unit(v)};
}

Vec3 normal(const SurfaceModel& surface, const Vec3& x) {
  if (std::holds_alternative<ParametricTorus>(surface.kind())) {
    const auto t = torus_shape(surface.kind());
    const double rho = std::hypot(x.x(), x.y());
    if (rho < kDegenerate || std::hypot(rho - t.major, x.z()) < kDegenerate)
      throw Error(ErrorKind::DegenerateNormal, "parametric torus normal undefined on the axis or core circle");
    const auto [alpha, beta] = surface.chart_inverse(x);
    const auto [da, db] = surface.chart_partials(alpha, beta);
    return da.cross(db).normalized();
  }
  const Vec3 g = surface.level_gradient(x);
  const double norm = g.norm();
  if (norm < kDegenerate) throw Error(ErrorKind::DegenerateNormal, "|grad phi| below 1e-12");
  return g / norm;
}

double mean_curvature(const SurfaceModel& surface, const Vec3& x) {
  if (std::holds_alternative<ParametricTorus>(surface.kind())) {
    // Principal curvatures 1/r and cos v / (R + r cos v) from the chart.
    const auto t = torus_shape(surface.kind());
    const double rho = std::hypot(x.x(), x.y());
    if (rho < kDegenerate || std::hypot(rho - t.major, x.z()) < kDegenerate)
      throw Error(ErrorKind::DegenerateNormal, "parametric torus curvature undefined on the axis or core circle");
    const double v = std::atan2(x.z(), rho - t.major);
    return -0.5 * (1.0 / t.minor + std::cos(v) / (t.major + t.minor * std::cos(v)));
  }
  const Vec3 g = surface.level_gradient(x);
  const double norm = g.norm();
  if (norm < kDegenerate) throw Error(ErrorKind::DegenerateNormal, "|grad phi| below 1e-12");
  const Vec3 n = g / norm;
  const Mat3 h = surface.level_hessian(x);
  const double divergence = (h.trace() - n.dot(h * n)) / norm;
  return -0.5 * divergence;
}

Vec3 closest_point(const SurfaceModel& surface, const Vec3& x) {
  Vec3 cp;
  if (const auto* s = std::get_if<Sphere>(&surface.kind())) {
    const double r = x.norm();
    if (r < kDegenerate) throw Error(ErrorKind::AmbiguousProjection, "every sphere point is closest to the center");
    cp = s->radius * x / r;
  } else if (const auto* e = std::get_if<Ellipsoid>(&surface.kind())) {
    cp = ellipsoid_closest_point(e->semi_axes, x);
  } else {
    const auto t = torus_shape(surface.kind());
    const double rho = std::hypot(x.x(), x.y());
    if (rho < kDegenerate) throw Error(ErrorKind::AmbiguousProjection, "closest point undefined on the torus axis");
    const Vec3 core(t.major * x.x() / rho, t.major * x.y() / rho, 0.0);
    const Vec3 offset = x - core;
    const double dist = offset.norm();
    if (dist < kDegenerate) throw Error(ErrorKind::AmbiguousProjection, "closest point undefined on the core circle");
    cp = core + t.minor * offset / dist;
  }
  if ((x - cp).norm() > surface.band_width())
    throw Error(ErrorKind::OutsideBand, "point lies farther than the extension band from " + surface.name());
  return cp;
}

double closest_point_extend(const SurfaceModel& surface, const ScalarField& u, const Vec3& x) {
  return u(closest_point(surface, x));
}

Vec3 fd_gradient(const ScalarField& u, const Vec3& x, double step) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e(k) = step;
    g(k) = (u(x + e) - u(x - e)) / (2.0 * step);
  }
  return g;
}

Mat3 fd_hessian(const ScalarField& u, const Vec3& x, double step) {
  Mat3 h;
  const double center = u(x);
  for (int i = 0; i < 3; ++i) {
    Vec3 ei = Vec3::Zero();
    ei(i) = step;
    h(i, i) = (u(x + ei) - 2.0 * center + u(x - ei)) / (step * step);
    for (int j = i + 1; j < 3; ++j) {
      Vec3 ej = Vec3::Zero();
      ej(j) = step;
      h(i, j) = (u(x + ei + ej) - u(x + ei - ej) - u(x - ei + ej) + u(x - ei - ej)) / (4.0 * step * step);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

Mat3 fd_jacobian(const VectorField& v, const Vec3& x, double step) {
  Mat3 j;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e(k) = step;
    j.col(k) = (v(x + e) - v(x - e)) / (2.0 * step);
  }
  return j;
}

Vec3 extension_gradient(const SurfaceModel& surface, const ScalarField& u, const Vec3& x,
                        const OracleOptions& options) {
  return fd_gradient([&](const Vec3& y) { return closest_point_extend(surface, u, y); }, x, options.step);
}

Vec3 surface_gradient(const SurfaceModel& surface, const ScalarField& u, const Vec3& x, const OracleOptions& options) {
  const Vec3 g = extension_gradient(surface, u, x, options);
  const Vec3 n = normal(surface, x);
  return g - g.dot(n) * n;
}

double surface_divergence(const SurfaceModel& surface, const VectorField& v, const Vec3& x,
                          const OracleOptions& options) {
  const Mat3 jac = fd_jacobian([&](const Vec3& y) { return v(closest_point(surface, y)); }, x, options.step);
  const Vec3 n = normal(surface, x);
  const Mat3 projector = Mat3::Identity() - n * n.transpose();
  // sum_i D_i v_i with D = P grad applied to each component.
  return (jac * projector).trace();
}

double laplace_beltrami(const SurfaceModel& surface, const ScalarField& u, const Vec3& x,
                        const OracleOptions& options) {
  return surface_divergence(
      surface, [&](const Vec3& y) { return surface_gradient(surface, u, y, options); }, x, options);
}

QuadratureRule quadrature_rule(const SurfaceModel& surface, int resolution) {
  if (resolution < 2) throw Error(ErrorKind::InvalidCount, "quadrature resolution must be at least 2");
  if (!surface.has_chart()) throw Error(ErrorKind::UnsupportedSurface, surface.name() + " has no chart");
  QuadratureRule rule;
  if (const auto* s = std::get_if<Sphere>(&surface.kind())) {
    const auto gl = gauss_legendre_rule(resolution);
    const int n_phi = 2 * resolution;
    const double r2 = s->radius * s->radius;
    rule.nodes.reserve(static_cast<std::size_t>(resolution) * n_phi);
    rule.weights.reserve(rule.nodes.capacity());
    for (int i = 0; i < resolution; ++i) {
      const double z = gl.nodes(i);
      const double ring = std::sqrt(1.0 - z * z);
      for (int j = 0; j < n_phi; ++j) {
        const double phi = kTwoPi * j / n_phi;
        rule.nodes.emplace_back(s->radius * Vec3(ring * std::cos(phi), ring * std::sin(phi), z));
        rule.weights.push_back(r2 * gl.weights(i) * kTwoPi / n_phi);
      }
    }
    return rule;
  }
  const auto t = torus_shape(surface.kind());
  const double cell = kTwoPi * kTwoPi / (static_cast<double>(resolution) * resolution);
  rule.nodes.reserve(static_cast<std::size_t>(resolution) * resolution);
  rule.weights.reserve(rule.nodes.capacity());
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double alpha = static_cast<double>(i) / resolution;
      const double beta = static_cast<double>(j) / resolution;
      rule.nodes.push_back(surface.chart(alpha, beta));
      rule.weights.push_back(cell * t.minor * (t.major + t.minor * std::cos(kTwoPi * beta)));
    }
  }
  return rule;
}

double quadrature(const SurfaceModel& surface, const ScalarField& field, int resolution) {
  const auto rule = quadrature_rule(surface, resolution);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * field(rule.nodes[i]);
  return sum;
}

}  // namespace surfpinn
