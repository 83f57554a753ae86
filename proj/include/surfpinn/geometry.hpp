#pragma once

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace surfpinn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using ScalarField = std::function<double(const Vec3&)>;
using VectorField = std::function<Vec3(const Vec3&)>;

struct Sphere {
  double radius = 1.0;
};

/// x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 with semi_axes = (a, b, c).
struct Ellipsoid {
  Vec3 semi_axes = Vec3::Ones();
};

struct ImplicitTorus {
  double major = 1.0;
  double minor = 0.25;
};

struct ParametricTorus {
  double major = 1.0;
  double minor = 0.25;
};

/// A closed surface in R^3 with analytic level function, normal, curvature
/// and closest-point map. Tori and spheres also carry a chart on [0,1]^2.
class SurfaceModel {
 public:
  using Kind = std::variant<Sphere, Ellipsoid, ImplicitTorus, ParametricTorus>;

  explicit SurfaceModel(Kind kind);

  static SurfaceModel sphere(double radius = 1.0) { return SurfaceModel(Sphere{radius}); }
  static SurfaceModel ellipsoid(const Vec3& semi_axes) { return SurfaceModel(Ellipsoid{semi_axes}); }
  static SurfaceModel implicit_torus(double major = 1.0, double minor = 0.25) {
    return SurfaceModel(ImplicitTorus{major, minor});
  }
  static SurfaceModel parametric_torus(double major = 1.0, double minor = 0.25) {
    return SurfaceModel(ParametricTorus{major, minor});
  }

  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;

  bool is_torus() const noexcept;
  bool is_sphere_homeomorphic() const noexcept { return !is_torus(); }

  /// Level function phi with the surface at phi = 0 (sphere |x|^2 - rho^2,
  /// ellipsoid sum x_i^2/a_i^2 - 1, torus (rho_xy - R)^2 + z^2 - r^2).
  double level(const Vec3& x) const;
  Vec3 level_gradient(const Vec3& x) const;
  Mat3 level_hessian(const Vec3& x) const;

  /// Smallest geometric length scale: radius, minor radius, or smallest semi-axis.
  double feature_size() const;
  double band_width() const { return band_fraction_ * feature_size(); }
  void set_band_fraction(double fraction) { band_fraction_ = fraction; }

  bool has_chart() const noexcept;
  /// (alpha, beta) in [0,1]^2 -> R^3; periodic in both arguments for tori.
  Vec3 chart(double alpha, double beta) const;
  std::pair<Vec3, Vec3> chart_partials(double alpha, double beta) const;
  std::pair<double, double> chart_inverse(const Vec3& x) const;

 private:
  Kind kind_;
  double band_fraction_ = 0.1;
};

/// Outward unit normal; on the band this is the normalized level gradient
/// (or the chart cross product for the parametric torus).
Vec3 normal(const SurfaceModel& surface, const Vec3& x);

/// Mean curvature with the convention div(n) = -2H, so the unit sphere has H = -1.
double mean_curvature(const SurfaceModel& surface, const Vec3& x);

/// Analytic closest point on the surface. Throws OutsideBand when x is
/// farther than band_width() from the surface, AmbiguousProjection where the
/// projection is not unique.
Vec3 closest_point(const SurfaceModel& surface, const Vec3& x);

/// u(cp(x)): constant along normal lines.
double closest_point_extend(const SurfaceModel& surface, const ScalarField& u, const Vec3& x);

/// Brute-force surface operators by central differences of closest-point
/// extensions. Accuracy is O(step^2).
struct OracleOptions {
  double step = 1e-4;
};

enum class SurfaceOperator { Grad, Div, LB };

Vec3 surface_gradient(const SurfaceModel& surface, const ScalarField& u, const Vec3& x,
                      const OracleOptions& options = {});
double surface_divergence(const SurfaceModel& surface, const VectorField& v, const Vec3& x,
                          const OracleOptions& options = {});
double laplace_beltrami(const SurfaceModel& surface, const ScalarField& u, const Vec3& x,
                        const OracleOptions& options = {});

/// Plain central-difference derivatives of a field defined on R^3.
Vec3 fd_gradient(const ScalarField& u, const Vec3& x, double step);
Mat3 fd_hessian(const ScalarField& u, const Vec3& x, double step);
/// J(i, j) = d v_i / d x_j.
Mat3 fd_jacobian(const VectorField& v, const Vec3& x, double step);

/// Ordinary gradient of the closest-point extension (no projection).
Vec3 extension_gradient(const SurfaceModel& surface, const ScalarField& u, const Vec3& x,
                        const OracleOptions& options = {});

struct QuadratureRule {
  std::vector<Vec3> nodes;
  std::vector<double> weights;
};

/// Sphere: Gauss-Legendre in z times periodic rectangle in azimuth (resolution
/// x 2*resolution nodes). Tori: periodic rectangle in both angles
/// (resolution x resolution nodes). Throws UnsupportedSurface without a chart.
QuadratureRule quadrature_rule(const SurfaceModel& surface, int resolution);

double quadrature(const SurfaceModel& surface, const ScalarField& field, int resolution);

}  // namespace surfpinn
