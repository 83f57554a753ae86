#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "surfpinn/geometry.hpp"

namespace surfpinn {

struct SpaceTimePoint {
  Vec3 x;
  double t = 0.0;
};

struct CollocationSet {
  std::vector<SpaceTimePoint> interior;
  std::vector<Vec3> initial;
  std::vector<Vec3> eval;
  std::uint64_t seed = 0;

  std::size_t n_interior() const { return interior.size(); }
  std::size_t n_initial() const { return initial.size(); }
  std::size_t n_eval() const { return eval.size(); }
};

/// Golden-angle Fibonacci lattice on the unit sphere:
/// z_i = 1 - (2i+1)/N, azimuth 2 pi i / golden_ratio.
std::vector<Vec3> fibonacci_sphere(int count);

/// Axis scaling of unit-sphere points onto a sphere or ellipsoid.
/// Throws NotSphereHomeomorphic for tori.
std::vector<Vec3> map_to_surface(std::span<const Vec3> unit_points, const SurfaceModel& surface);

/// Tensor product with the uniform partition t_k = k T / (M - 1), point-major.
std::vector<SpaceTimePoint> tensor_time(std::span<const Vec3> points, double horizon, int time_count);

/// Latin hypercube in [0,1]^dims: each column has one sample per stratum [k/N, (k+1)/N).
Eigen::MatrixXd latin_hypercube(int count, int dims, std::uint64_t seed);

/// LHS in (alpha, beta, t), (alpha, beta) pushed through the surface chart, t scaled to [0, T].
std::vector<SpaceTimePoint> lhs_parametric(int count, const SurfaceModel& surface, double horizon,
                                           std::uint64_t seed);

/// Evaluation points disjoint from any training lattice: a rotated Fibonacci
/// lattice for sphere-like surfaces, an independent LHS stream for tori.
std::vector<Vec3> evaluation_points(const SurfaceModel& surface, int count, std::uint64_t seed);

/// Writes x,y,z,t rows for audit.
void write_points_csv(const std::filesystem::path& path, std::span<const SpaceTimePoint> points);

}  // namespace surfpinn
