#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "surfpinn/error.hpp"
#include "surfpinn/sampling.hpp"

using namespace surfpinn;

namespace {

void expect_one_per_stratum(std::vector<double> values) {
  const auto n = static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  for (std::size_t k = 0; k < values.size(); ++k) {
    EXPECT_GE(values[k], static_cast<double>(k) / n);
    EXPECT_LT(values[k], static_cast<double>(k + 1) / n);
  }
}

}  // namespace

TEST(Fibonacci, SinglePointOnEquator) {
  const auto p = fibonacci_sphere(1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0](2), 0.0);
  EXPECT_NEAR(p[0].norm(), 1.0, 1e-15);
}

TEST(Fibonacci, FourPointHeights) {
  const auto p = fibonacci_sphere(4);
  const double z[] = {0.75, 0.25, -0.25, -0.75};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p[static_cast<std::size_t>(i)](2), z[i]);
}

TEST(Fibonacci, GoldenAzimuth) {
  const auto p = fibonacci_sphere(10);
  const double golden = (1 + std::sqrt(5.0)) / 2;
  for (int i = 0; i < 10; ++i) {
    const auto& x = p[static_cast<std::size_t>(i)];
    const double theta = 2 * std::numbers::pi * i / golden;
    const double rho = std::sqrt(1 - x(2) * x(2));
    EXPECT_NEAR(x(0), rho * std::cos(theta), 1e-14);
    EXPECT_NEAR(x(1), rho * std::sin(theta), 1e-14);
  }
}

TEST(Fibonacci, UnitNorms) {
  for (const auto& x : fibonacci_sphere(500)) EXPECT_NEAR(x.norm(), 1.0, 1e-12);
}

TEST(Fibonacci, AreaProportionalCap) {
  const auto p = fibonacci_sphere(10000);
  const auto cap = std::count_if(p.begin(), p.end(), [](const Vec3& x) { return x(2) > 0.5; });
  EXPECT_NEAR(static_cast<double>(cap) / 10000.0, 0.25, 0.02);
}

TEST(Fibonacci, ZeroCountRejected) {
  try {
    fibonacci_sphere(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidCount);
  }
}

TEST(MapToSurface, SphereIsIdentity) {
  const auto p = fibonacci_sphere(20);
  const auto q = map_to_surface(p, SurfaceModel::sphere(1.0));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], q[i]);
}

TEST(MapToSurface, EllipsoidAxisScaling) {
  const auto e = SurfaceModel::ellipsoid({std::sqrt(2.0), 1.0, 1.0});
  const std::vector<Vec3> pole{{1, 0, 0}};
  EXPECT_NEAR((map_to_surface(pole, e)[0] - Vec3(std::sqrt(2.0), 0, 0)).norm(), 0.0, 1e-15);
  for (const auto& x : map_to_surface(fibonacci_sphere(300), e)) EXPECT_LE(std::abs(e.level(x)), 1e-12);
}

TEST(MapToSurface, TorusRejected) {
  const auto p = fibonacci_sphere(3);
  try {
    map_to_surface(p, SurfaceModel::implicit_torus(1.0, 0.25));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSphereHomeomorphic);
  }
}

TEST(TensorTime, Counts) {
  EXPECT_EQ(tensor_time(fibonacci_sphere(500), 1.0, 100).size(), 50000u);
}

TEST(TensorTime, TwoTimesAreEndpoints) {
  const std::vector<Vec3> one{{0, 0, 1}};
  const auto s = tensor_time(one, 2.5, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].t, 0.0);
  EXPECT_EQ(s[1].t, 2.5);
  EXPECT_EQ(s[0].x, one[0]);
}

TEST(TensorTime, UniformGrid) {
  const auto s = tensor_time(fibonacci_sphere(10), 1.0, 10);
  ASSERT_EQ(s.size(), 100u);
  for (const auto& p : s) {
    const double k = p.t * 9.0;
    EXPECT_NEAR(k, std::round(k), 1e-12);
    EXPECT_GE(p.t, 0.0);
    EXPECT_LE(p.t, 1.0);
  }
}

TEST(LatinHypercube, TwoSamplesSplitHalves) {
  const auto m = latin_hypercube(2, 3, 5);
  for (int d = 0; d < 3; ++d) {
    EXPECT_NE(m(0, d) < 0.5, m(1, d) < 0.5);
  }
}

TEST(LatinHypercube, Stratified) {
  for (std::uint64_t seed : {1ULL, 77ULL, 123456789ULL}) {
    const auto m = latin_hypercube(997, 3, seed);
    for (int d = 0; d < 3; ++d) expect_one_per_stratum(std::vector<double>(m.col(d).begin(), m.col(d).end()));
  }
}

TEST(LatinHypercube, SeedDeterminism) {
  EXPECT_EQ(latin_hypercube(100, 3, 9), latin_hypercube(100, 3, 9));
  EXPECT_NE(latin_hypercube(100, 3, 9), latin_hypercube(100, 3, 10));
}

TEST(LhsParametric, TorusPointsOnSurfaceAndTimesStratified) {
  const auto torus = SurfaceModel::implicit_torus(1.0, 0.25);
  const auto s = lhs_parametric(2000, torus, 3.0, 42);
  ASSERT_EQ(s.size(), 2000u);
  std::vector<double> times;
  for (const auto& p : s) {
    EXPECT_LE(std::abs(torus.level(p.x)), 1e-12);
    times.push_back(p.t / 3.0);
  }
  expect_one_per_stratum(times);
  const auto again = lhs_parametric(2000, torus, 3.0, 42);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].x, again[i].x);
    EXPECT_EQ(s[i].t, again[i].t);
  }
}

TEST(LhsParametric, PaperScaleTorusRun) {
  const auto s = lhs_parametric(50000, SurfaceModel::parametric_torus(1.0, 0.25), 3.0, 2024);
  EXPECT_EQ(s.size(), 50000u);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end(), [](auto& a, auto& b) { return a.t < b.t; });
  EXPECT_GE(lo->t, 0.0);
  EXPECT_LE(hi->t, 3.0);
}

TEST(EvaluationPoints, DisjointFromTrainingLattice) {
  const auto sphere = SurfaceModel::sphere(1.0);
  const auto train = fibonacci_sphere(500);
  const auto eval = evaluation_points(sphere, 10000, 2024);
  ASSERT_EQ(eval.size(), 10000u);
  double closest = 1.0;
  for (const auto& e : eval) {
    EXPECT_NEAR(e.norm(), 1.0, 1e-12);
    for (const auto& t : train) closest = std::min(closest, (e - t).norm());
  }
  EXPECT_GT(closest, 1e-9);
}

TEST(EvaluationPoints, TorusStreamDiffersFromTraining) {
  const auto torus = SurfaceModel::implicit_torus(1.0, 0.25);
  const auto train = lhs_parametric(500, torus, 0.0, 2024);
  const auto eval = evaluation_points(torus, 500, 2024);
  for (const auto& e : eval) {
    EXPECT_LE(std::abs(torus.level(e)), 1e-12);
    for (const auto& t : train) EXPECT_GT((e - t.x).norm(), 1e-9);
  }
}

TEST(PointsCsv, Columns) {
  const auto path = std::filesystem::temp_directory_path() / "surfpinn_points.csv";
  const std::vector<SpaceTimePoint> pts{{{1, 0, 0}, 0.5}};
  write_points_csv(path, pts);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "x,y,z,t");
  EXPECT_EQ(row, "1,0,0,0.5");
  std::filesystem::remove(path);
}
