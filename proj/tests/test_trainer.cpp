#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "surfpinn/trainer.hpp"

using namespace surfpinn;
using Eigen::VectorXd;

namespace {

std::string checkpoint_text(const Checkpoint& c) {
  std::stringstream out;
  write_checkpoint(out, c);
  return out.str();
}

// Log rows without the wall-clock column.
std::vector<std::array<double, 6>> loss_rows(const TrainingLog& log) {
  std::vector<std::array<double, 6>> rows;
  for (const auto& r : log.records) rows.push_back({double(r.iteration), r.total, r.pde, r.ng, r.hess, r.init});
  return rows;
}

struct SphereHeat {
  ContinuousData data;
  ResidualBatch<double> full;

  SphereHeat() {
    const auto sphere = SurfaceModel::sphere(1.0);
    CollocationSet c;
    const auto pts = fibonacci_sphere(40);
    c.interior = tensor_time(pts, 1.0, 3);
    c.initial = pts;
    const PdeRhs rhs{[](const Vec3& x, double t) { return x(0) * std::cos(t); }};
    data = continuous_data(sphere, c, rhs, [](const Vec3& x) { return x(2); }, 1.0);
    full = data.batch();
  }

  LossSource source() const {
    return {[this]() -> const ResidualBatch<double>& { return full; },
            [this](Rng& rng, Eigen::Index size) { return data.sample(rng, size).batch(); }};
  }
};

TrainingConfig small_config(int iterations) {
  TrainingConfig c;
  c.iterations = iterations;
  c.log_every = 2;
  c.checkpoint_every = 3;
  c.seed = 11;
  c.chunk = 32;
  return c;
}

}  // namespace

TEST(Adam, ZeroGradientKeepsParameters) {
  VectorXd theta = VectorXd::LinSpaced(5, -1, 1);
  const VectorXd before = theta;
  AdamState s = adam_init(5);
  s.m.setConstant(0.5);
  s.v.setConstant(0.25);
  TrainingConfig c;
  adam_step(theta, VectorXd::Zero(5), s, c);
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(s.m(i), 0.45);
    EXPECT_DOUBLE_EQ(s.v(i), 0.25 * 0.999);
  }
  AdamState fresh = adam_init(5);
  theta = before;
  adam_step(theta, VectorXd::Zero(5), fresh, c);
  EXPECT_EQ(theta, before);
}

TEST(Adam, FirstStepIsNormalizedGradient) {
  TrainingConfig c;
  c.learning_rate = 0.01;
  VectorXd theta = VectorXd::Zero(4);
  VectorXd g(4);
  g << 3.0, -0.5, 1e-9, 0.0;
  AdamState s = adam_init(4);
  adam_step(theta, g, s, c);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(theta(i), -c.learning_rate * g(i) / (std::abs(g(i)) + c.adam_eps), 1e-15);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ConstantGradientStepsAreBounded) {
  TrainingConfig c;
  VectorXd theta = VectorXd::Zero(3);
  AdamState s = adam_init(3);
  const VectorXd g = VectorXd::Constant(3, 42.0);
  for (int k = 0; k < 500; ++k) {
    const VectorXd before = theta;
    adam_step(theta, g, s, c);
    EXPECT_LE((theta - before).cwiseAbs().maxCoeff(), c.learning_rate * (1 + 1e-9));
  }
}

TEST(Adam, NonFiniteGradient) {
  TrainingConfig c;
  VectorXd theta = VectorXd::Zero(2);
  AdamState s = adam_init(2);
  try {
    adam_step(theta, VectorXd::Constant(2, std::numeric_limits<double>::quiet_NaN()), s, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteUpdate);
  }
}

TEST(TrainingConfig, Validation) {
  TrainingConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.learning_rate = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.beta2 = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.iterations = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.batch_mode = BatchMode::MiniBatch;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Train, LinearNetworkDescends) {
  const auto sphere = SurfaceModel::sphere(1.0);
  const auto pts = fibonacci_sphere(30);
  const auto batch = stationary_batch<double>(pts, normals_at(sphere, std::span<const Vec3>(pts)), VectorXd::Zero(30));
  MlpParamsd p = zero_params<double>({3, 1});
  p.weights[0] << 0.4, -0.3, 0.8;
  const double initial = loss_breakdown(p, batch).total;
  TrainingConfig c = small_config(100);
  c.learning_rate = 1e-2;
  const auto r = train({[&]() -> const ResidualBatch<double>& { return batch; }, {}}, {p, {}, 0}, c);
  EXPECT_LE(loss_breakdown(r.state.params, batch).total, initial);
  EXPECT_LT(loss_breakdown(r.state.params, batch).total, 0.1 * initial);
  EXPECT_EQ(r.state.iteration, 100);
  ASSERT_FALSE(r.log.records.empty());
  EXPECT_EQ(r.log.records.back().iteration, 100);
}

TEST(Train, LogIterationsIncreaseAndAreFinite) {
  SphereHeat heat;
  const auto r = train(heat.source(), {init_params({4, 8, 8, 1}, 3), {}, 0}, small_config(9));
  ASSERT_EQ(r.log.records.size(), 5u);  // 2, 4, 6, 8, 9
  for (std::size_t i = 0; i < r.log.records.size(); ++i) {
    const auto& rec = r.log.records[i];
    if (i > 0) {
      EXPECT_GT(rec.iteration, r.log.records[i - 1].iteration);
    }
    EXPECT_TRUE(std::isfinite(rec.total));
    EXPECT_NEAR(rec.total, rec.pde + rec.ng + rec.hess + rec.init, 1e-12 * rec.total);
  }
}

TEST(Train, DeterministicRepeat) {
  SphereHeat heat;
  for (auto mode : {BatchMode::FullBatch, BatchMode::MiniBatch}) {
    TrainingConfig c = small_config(12);
    c.batch_mode = mode;
    c.batch_size = 20;
    const auto a = train(heat.source(), {init_params({4, 8, 8, 1}, 3), {}, 0}, c);
    const auto b = train(heat.source(), {init_params({4, 8, 8, 1}, 3), {}, 0}, c);
    EXPECT_EQ(loss_rows(a.log), loss_rows(b.log));
    EXPECT_EQ(checkpoint_text(a.state), checkpoint_text(b.state));
  }
}

TEST(Train, ThreadCountDoesNotChangeResults) {
  SphereHeat heat;
  TrainingConfig c = small_config(6);
  const auto a = train(heat.source(), {init_params({4, 8, 8, 1}, 3), {}, 0}, c);
  c.threads = 3;
  const auto b = train(heat.source(), {init_params({4, 8, 8, 1}, 3), {}, 0}, c);
  EXPECT_EQ(checkpoint_text(a.state), checkpoint_text(b.state));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  SphereHeat heat;
  const auto dir = std::filesystem::temp_directory_path() / "surfpinn_resume_test";
  std::filesystem::create_directories(dir);
  for (auto mode : {BatchMode::FullBatch, BatchMode::MiniBatch}) {
    TrainingConfig c = small_config(10);
    c.batch_mode = mode;
    c.batch_size = 16;
    const auto whole = train(heat.source(), {init_params({4, 8, 8, 1}, 5), {}, 0}, c);

    TrainingConfig first = c;
    first.iterations = 6;
    TrainOutputs out;
    out.checkpoint = dir / "ckpt.txt";
    train(heat.source(), {init_params({4, 8, 8, 1}, 5), {}, 0}, first, out);
    const Checkpoint loaded = load_checkpoint(dir / "ckpt.txt");
    EXPECT_EQ(loaded.iteration, 6);
    const auto resumed = train(heat.source(), loaded, c);
    EXPECT_EQ(checkpoint_text(whole.state), checkpoint_text(resumed.state));
  }
  std::filesystem::remove_all(dir);
}

TEST(Train, NonFiniteLossKeepsLastCheckpoint) {
  SphereHeat heat;
  const auto dir = std::filesystem::temp_directory_path() / "surfpinn_nan_test";
  std::filesystem::create_directories(dir);
  TrainOutputs out;
  out.checkpoint = dir / "ckpt.txt";
  TrainingConfig c = small_config(3);
  const auto good = train(heat.source(), {init_params({4, 8, 8, 1}, 5), {}, 0}, c, out);

  ContinuousData poisoned = heat.data;
  poisoned.f(0) = std::numeric_limits<double>::quiet_NaN();
  const auto bad_batch = poisoned.batch();
  c.iterations = 6;
  try {
    train({[&]() -> const ResidualBatch<double>& { return bad_batch; }, {}}, good.state, c, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLoss);
  }
  EXPECT_EQ(checkpoint_text(load_checkpoint(dir / "ckpt.txt")), checkpoint_text(good.state));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Checkpoint c{init_params({4, 6, 2}, 9), adam_init(0), 17};
  c.adam = adam_init(c.params.parameter_count());
  c.adam.m.setLinSpaced(-1.0 / 3.0, 2.0 / 7.0);
  c.adam.v.setConstant(1e-300);
  c.adam.step = 17;
  std::stringstream buffer;
  write_checkpoint(buffer, c);
  const auto back = read_checkpoint(buffer);
  EXPECT_EQ(flatten(back.params), flatten(c.params));
  EXPECT_EQ(back.adam.m, c.adam.m);
  EXPECT_EQ(back.adam.v, c.adam.v);
  EXPECT_EQ(back.adam.step, 17);
  EXPECT_EQ(back.iteration, 17);
}

TEST(Checkpoint, BareParameterFileLoads) {
  const auto p = init_params({3, 4, 1}, 2);
  std::stringstream buffer;
  write_params(buffer, p);
  const auto c = read_checkpoint(buffer);
  EXPECT_EQ(flatten(c.params), flatten(p));
  EXPECT_EQ(c.iteration, 0);
  EXPECT_EQ(c.adam.m.size(), 0);
}

TEST(TrainingLog, CsvRoundTrip) {
  TrainingLog log;
  log.records.push_back({10, 1.5, 1.0, 0.25, 0.125, 0.125, 0.01});
  log.records.push_back({20, 0.1 + 0.2, 1e-300, 0, 0, 0.3, 2.5});
  std::stringstream buffer;
  log.write_csv(buffer);
  EXPECT_EQ(buffer.str().substr(0, 35), "iter,total,pde,ng,hess,init,seconds");
  const auto back = TrainingLog::read_csv(buffer);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].total, 0.1 + 0.2);
  EXPECT_EQ(back.records[1].pde, 1e-300);
  EXPECT_EQ(loss_rows(back), loss_rows(log));
}

TEST(DivergenceDetector, FlagsTenfoldMedianGrowth) {
  DivergenceDetector d(4, 10.0);
  for (double v : {5.0, 4.0, 3.0, 2.0}) EXPECT_TRUE(d.push(v));
  for (double v : {1.0, 1.0, 1.0, 1.0}) EXPECT_TRUE(d.push(v));
  EXPECT_DOUBLE_EQ(d.best_median(), 1.0);
  for (double v : {9.0, 9.5, 1e6, 0.1}) EXPECT_TRUE(d.push(v));  // median 9.5 < 10
  for (double v : {20.0, 30.0, 25.0}) EXPECT_TRUE(d.push(v));
  EXPECT_FALSE(d.push(40.0));
}
