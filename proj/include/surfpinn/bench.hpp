#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "surfpinn/geometry.hpp"
#include "surfpinn/irk.hpp"
#include "surfpinn/network.hpp"
#include "surfpinn/residuals.hpp"
#include "surfpinn/sampling.hpp"
#include "surfpinn/trainer.hpp"

namespace surfpinn {

using SpaceTimeField = std::function<double(const Vec3&, double)>;

enum class SolverMode { Continuous, Discrete };

/// How collocation points are generated.
enum class SamplingScheme {
  FibonacciTensor,  // Fibonacci lattice x uniform time partition, initial = the lattice
  LatinHypercube,   // LHS in (alpha, beta, t) through the chart, initial = LHS at t = 0
};

struct ProblemSpec {
  std::string name;
  std::string solution;  // exact-solution selector, empty when not applicable
  SurfaceModel surface = SurfaceModel::sphere(1.0);
  SolverMode mode = SolverMode::Continuous;
  int stages = 8;                 // Discrete
  double horizon = 1.0;           // T
  double reference_horizon = 0;   // T~ in (0, 1); 0 disables rescaling
  PdeRhs rhs;
  ScalarField u0;
  std::optional<SpaceTimeField> exact;
  SamplingScheme sampling = SamplingScheme::FibonacciTensor;
  int n_space = 500;     // lattice size (FibonacciTensor) or N_u (LatinHypercube)
  int n_time = 100;      // time partition points (FibonacciTensor, Continuous)
  int n_initial = 500;   // N_0 (LatinHypercube)
  int n_eval = 10000;    // N_c
  std::uint64_t seed = 2024;
  std::vector<double> report_times;

  /// N_u
  int n_interior() const;
  /// Effective time map (identity unless T >= 1 and T~ is set).
  TimeRescaling rescaling() const;
  /// Network layer sizes for this problem's mode.
  std::vector<int> network_layers() const;
};

/// Names accepted by make_problem.
std::vector<std::string> problem_names();

/// Throws UnknownProblem. `solution` selects the exact solution where the
/// problem offers several ("product-exp" or "sine-mix").
ProblemSpec make_problem(const std::string& name, const std::string& solution = "");

/// Exact fields used by the registry.
double product_exp(const Vec3& x, double t);  // x1 x2 x3 e^t
double sine_mix(const Vec3& x, double t);     // x1 sin(t x2) + x3

/// f = du/dt - Lap_G u with Lap_G from the geometry oracle and du/dt from a
/// central difference in t.
PdeRhs manufactured_rhs(const SurfaceModel& surface, SpaceTimeField exact, double time_step = 1e-4);

/// 100 * (1 + tanh((0.25 - |x - (0,1,0)|) / eps)) / 2; eps = 0 gives 100 chi_G.
double torus_forcing(const Vec3& x, double eps);

CollocationSet make_collocation(const ProblemSpec& problem);

/// Training batches for the problem's loss.
struct ProblemLoss {
  std::optional<ContinuousData> continuous;
  std::optional<DiscreteData> discrete;
  ResidualBatch<double> full;

  LossSource source() const;
};

ProblemLoss make_loss(const ProblemSpec& problem, const CollocationSet& colloc);

/// Network prediction at original time t (discrete mode interpolates heads).
Eigen::VectorXd predict(const MlpParamsd& params, const ProblemSpec& problem, std::span<const Vec3> points, double t);

/// Times (original scale) represented by the discrete heads, with 0 prepended.
std::vector<double> discrete_node_times(const ProblemSpec& problem);

/// sqrt(sum |u_h - u|^2) / sqrt(sum |u|^2). Throws NoExactSolution, ZeroDenominator.
double relative_error(const MlpParamsd& params, const ProblemSpec& problem, std::span<const Vec3> points, double t);
double relative_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact);

struct ErrorRow {
  double t = 0.0;
  double err = 0.0;
  int n_eval = 0;
  std::uint64_t seed = 0;
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  void write_csv(const std::filesystem::path& path) const;
};

ErrorReport error_report(const MlpParamsd& params, const ProblemSpec& problem, std::span<const double> times);

/// x,y,z,t,u_pred,u_exact,abs_err (last two empty without an exact solution).
void write_field_csv(const std::filesystem::path& path, const MlpParamsd& params, const ProblemSpec& problem,
                     std::span<const Vec3> points, double t);

/// Integral of the network field over the surface at time t.
double heat_content(const MlpParamsd& params, const ProblemSpec& problem, double t, int resolution);

/// Runs Adam on the problem's loss.
TrainResult train_problem(const ProblemSpec& problem, const MlpParamsd& init, const TrainingConfig& config,
                          const TrainOutputs& outputs = {});

/// Gradient check of the full continuous sphere loss (sine-mix forcing) at
/// `points` lattice points with times spread over [0, 1]. Extended precision
/// evaluates the loss in long double.
FdReport continuous_fd_check(const std::vector<int>& layers, std::uint64_t seed, int points, double step,
                             bool extended_precision = false);

// Theorem verification ------------------------------------------------------

/// One trial's fields. `u` and `v` are ambient fields (their own extensions);
/// `f`, `g_div`, `g_lap` are the targets of the three estimates.
struct TheoremFields {
  ScalarField u;
  VectorField f;
  VectorField v;
  ScalarField g_div;
  ScalarField g_lap;
};

struct TheoremRow {
  int trial = 0;
  int estimate = 0;  // 1: gradient, 2: divergence, 3: Laplace-Beltrami
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 1.0;
  double margin = 0.0;  // rhs (1 + 1e-6) + 1e-8 - lhs
  bool passed() const { return margin >= 0.0; }
};

struct TheoremReport {
  std::vector<TheoremRow> rows;
  double sup_abs_mean_curvature = 0.0;
  double constant = 1.0;

  bool all_passed(double tolerance = 1e-8) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TheoremOptions {
  int resolution = 48;
  double fd_step = 1e-4;
  bool check_resolution = true;  // QuadratureTooCoarse test against resolution / 2
};

TheoremReport verify_theorem(const SurfaceModel& surface, std::span<const TheoremFields> trials,
                             const TheoremOptions& options = {});

/// Random low-order trigonometric fields, not constant along normals.
std::vector<TheoremFields> random_theorem_fields(int count, std::uint64_t seed);

}  // namespace surfpinn
