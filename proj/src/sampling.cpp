#include "surfpinn/sampling.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "surfpinn/error.hpp"
#include "surfpinn/random.hpp"

namespace surfpinn {

std::vector<Vec3> fibonacci_sphere(int count) {
  if (count < 1) throw Error(ErrorKind::InvalidCount, "Fibonacci lattice needs at least one point");
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double theta = 2.0 * std::numbers::pi * i / golden;
    const double ring = std::sqrt(std::max(0.0, 1.0 - z * z));
    points.emplace_back(ring * std::cos(theta), ring * std::sin(theta), z);
  }
  return points;
}

std::vector<Vec3> map_to_surface(std::span<const Vec3> unit_points, const SurfaceModel& surface) {
  Vec3 scale;
  if (const auto* s = std::get_if<Sphere>(&surface.kind())) {
    scale.setConstant(s->radius);
  } else if (const auto* e = std::get_if<Ellipsoid>(&surface.kind())) {
    scale = e->semi_axes;
  } else {
    throw Error(ErrorKind::NotSphereHomeomorphic, surface.name() + " cannot be reached by axis scaling; use LHS");
  }
  std::vector<Vec3> mapped;
  mapped.reserve(unit_points.size());
  for (const auto& p : unit_points) mapped.push_back(p.cwiseProduct(scale));
  return mapped;
}

std::vector<SpaceTimePoint> tensor_time(std::span<const Vec3> points, double horizon, int time_count) {
  if (time_count < 2) throw Error(ErrorKind::InvalidCount, "time partition needs at least two points");
  std::vector<SpaceTimePoint> out;
  out.reserve(points.size() * static_cast<std::size_t>(time_count));
  for (const auto& x : points) {
    for (int k = 0; k < time_count; ++k) {
      // The last node is exactly T.
      const double t = k == time_count - 1 ? horizon : horizon * k / (time_count - 1);
      out.push_back({x, t});
    }
  }
  return out;
}

Eigen::MatrixXd latin_hypercube(int count, int dims, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorKind::InvalidCount, "LHS needs at least one sample");
  Rng rng(seed);
  Eigen::MatrixXd samples(count, dims);
  std::vector<int> strata(static_cast<std::size_t>(count));
  for (int d = 0; d < dims; ++d) {
    for (int k = 0; k < count; ++k) strata[static_cast<std::size_t>(k)] = k;
    for (int k = count - 1; k > 0; --k) {
      const auto j = rng.below(static_cast<std::size_t>(k) + 1);
      std::swap(strata[static_cast<std::size_t>(k)], strata[j]);
    }
    for (int k = 0; k < count; ++k) {
      const double offset = rng.uniform();
      samples(k, d) = (strata[static_cast<std::size_t>(k)] + offset) / count;
    }
  }
  return samples;
}

std::vector<SpaceTimePoint> lhs_parametric(int count, const SurfaceModel& surface, double horizon,
                                           std::uint64_t seed) {
  if (!surface.has_chart()) throw Error(ErrorKind::UnsupportedSurface, surface.name() + " has no chart");
  const Eigen::MatrixXd cube = latin_hypercube(count, 3, seed);
  std::vector<SpaceTimePoint> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back({surface.chart(cube(i, 0), cube(i, 1)), horizon * cube(i, 2)});
  return out;
}

std::vector<Vec3> evaluation_points(const SurfaceModel& surface, int count, std::uint64_t seed) {
  if (surface.is_sphere_homeomorphic()) {
    // Rotation by one radian about (1,1,1)/sqrt(3): an irrational multiple of
    // pi, so no rotated node can coincide with an unrotated lattice node.
    const Eigen::AngleAxisd rotation(1.0, Vec3::Ones().normalized());
    auto lattice = fibonacci_sphere(count);
    for (auto& p : lattice) p = rotation * p;
    return map_to_surface(lattice, surface);
  }
  const auto sampled = lhs_parametric(count, surface, 0.0, derive_seed(seed, 0xE7A1));
  std::vector<Vec3> out;
  out.reserve(sampled.size());
  for (const auto& p : sampled) out.push_back(p.x);
  return out;
}

void write_points_csv(const std::filesystem::path& path, std::span<const SpaceTimePoint> points) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot open " + path.string());
  out.precision(17);
  out << "x,y,z,t\n";
  for (const auto& p : points) out << p.x.x() << ',' << p.x.y() << ',' << p.x.z() << ',' << p.t << '\n';
}

}  // namespace surfpinn
