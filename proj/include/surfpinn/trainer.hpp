#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "surfpinn/network.hpp"
#include "surfpinn/random.hpp"
#include "surfpinn/residuals.hpp"

namespace surfpinn {

enum class BatchMode { FullBatch, MiniBatch };

struct TrainingConfig {
  int iterations = 50000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  BatchMode batch_mode = BatchMode::FullBatch;
  Eigen::Index batch_size = 0;  // used by MiniBatch
  std::uint64_t seed = 0;
  int log_every = 100;
  int checkpoint_every = 1000;
  LossWeights weights;
  int threads = 1;
  Eigen::Index chunk = 256;
  int divergence_window = 2000;
  double divergence_factor = 10.0;
  bool quasi_newton_refinement = false;  // reserved, not implemented

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

AdamState adam_init(Eigen::Index parameter_count);

/// One bias-corrected Adam update of `theta`; throws NonFiniteUpdate.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, AdamState& state,
               const TrainingConfig& config);

/// Loss at the parameters that step `iteration` starts from (full batch).
struct LogRecord {
  int iteration = 0;
  double total = 0.0;
  double pde = 0.0;
  double ng = 0.0;
  double hess = 0.0;
  double init = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<LogRecord> records;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  static TrainingLog read_csv(std::istream& in);
};

/// Where training gets its loss batches. `sample` is only needed for
/// MiniBatch mode and must be a pure function of the rng it is handed.
struct LossSource {
  std::function<const ResidualBatch<double>&()> full;
  std::function<ResidualBatch<double>(Rng& rng, Eigen::Index size)> sample;
};

struct Checkpoint {
  MlpParamsd params;
  AdamState adam;
  int iteration = 0;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
/// Written through a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> log;
  std::function<void(const LogRecord&)> on_log;
};

struct TrainResult {
  Checkpoint state;
  TrainingLog log;
};

/// Runs Adam from `start` (fresh moments when start.adam is empty) until
/// config.iterations steps in total have been taken. Throws NonFiniteLoss or
/// Diverged; the last checkpoint written before the failure stays in place.
TrainResult train(const LossSource& source, Checkpoint start, const TrainingConfig& config,
                  const TrainOutputs& outputs = {});

/// Jet tapes allocate multi-megabyte blocks on every evaluation. With glibc
/// this keeps them on the heap instead of fresh mmaps, which otherwise
/// costs a page-fault storm. Called by train(); idempotent.
void keep_large_blocks_on_heap();

/// Windowed-median divergence test.
class DivergenceDetector {
 public:
  DivergenceDetector(int window, double factor) : window_(window), factor_(factor) {}

  /// Returns false once the latest full window's median exceeds factor times the best.
  bool push(double loss);
  double best_median() const { return best_; }

 private:
  int window_;
  double factor_;
  std::vector<double> current_;
  double best_ = 0.0;
  bool have_best_ = false;
};

}  // namespace surfpinn
