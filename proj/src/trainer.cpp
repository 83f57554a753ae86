#include "surfpinn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "surfpinn/text_io.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace surfpinn {

void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
    return true;
  }();
  (void)once;
#endif
}

void TrainingConfig::validate() const {
  if (iterations < 1) throw Error(ErrorKind::InvalidArgument, "iterations must be at least 1");
  if (!(learning_rate > 0)) throw Error(ErrorKind::InvalidArgument, "learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw Error(ErrorKind::InvalidArgument, "adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw Error(ErrorKind::InvalidArgument, "adam_eps must be positive");
  if (batch_mode == BatchMode::MiniBatch && batch_size < 1)
    throw Error(ErrorKind::InvalidArgument, "mini-batch size must be positive");
  if (log_every < 1 || checkpoint_every < 1) throw Error(ErrorKind::InvalidArgument, "intervals must be positive");
  if (threads < 1 || chunk < 1) throw Error(ErrorKind::InvalidArgument, "threads and chunk must be positive");
  if (divergence_window < 1 || !(divergence_factor > 1))
    throw Error(ErrorKind::InvalidArgument, "divergence window must be positive and factor above 1");
}

AdamState adam_init(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0}; }

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& g, AdamState& s, const TrainingConfig& c) {
  if (g.size() != theta.size() || s.m.size() != theta.size() || s.v.size() != theta.size())
    throw Error(ErrorKind::ShapeMismatch, "gradient and optimizer state must match the parameters");
  if (!g.allFinite()) throw Error(ErrorKind::NonFiniteUpdate, "gradient has non-finite entries");
  ++s.step;
  s.m = c.beta1 * s.m + (1 - c.beta1) * g;
  s.v = c.beta2 * s.v + (1 - c.beta2) * g.cwiseAbs2();
  const double bc1 = 1 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1 - std::pow(c.beta2, static_cast<double>(s.step));
  const Eigen::VectorXd update =
      (c.learning_rate * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + c.adam_eps)).matrix();
  if (!update.allFinite()) throw Error(ErrorKind::NonFiniteUpdate, "Adam update has non-finite entries");
  theta -= update;
}

void TrainingLog::write_csv(std::ostream& out) const {
  out << "iter,total,pde,ng,hess,init,seconds\n";
  for (const auto& r : records)
    out << r.iteration << ',' << format_double(r.total) << ',' << format_double(r.pde) << ',' << format_double(r.ng)
        << ',' << format_double(r.hess) << ',' << format_double(r.init) << ',' << format_double(r.seconds) << '\n';
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  write_csv(out);
}

TrainingLog TrainingLog::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "iter,total,pde,ng,hess,init,seconds")
    throw Error(ErrorKind::ParseError, "training log header mismatch");
  TrainingLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(ErrorKind::ParseError, "training log row needs 7 fields: " + line);
    LogRecord r;
    r.iteration = std::stoi(cells[0]);
    r.total = parse_double(cells[1]);
    r.pde = parse_double(cells[2]);
    r.ng = parse_double(cells[3]);
    r.hess = parse_double(cells[4]);
    r.init = parse_double(cells[5]);
    r.seconds = parse_double(cells[6]);
    log.records.push_back(r);
  }
  return log;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  write_params(out, c.params);
  out << "iteration " << c.iteration << '\n';
  out << "adam-step " << c.adam.step << '\n';
  write_vector(out, "adam-m", c.adam.m);
  write_vector(out, "adam-v", c.adam.v);
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint c;
  c.params = read_params(in);
  std::string token;
  if (!(in >> token)) return c;  // bare parameter file
  if (token != "iteration") throw Error(ErrorKind::ParseError, "expected iteration, found " + token);
  c.iteration = read_value<int>(in, "iteration");
  expect_token(in, "adam-step");
  c.adam.step = read_value<std::int64_t>(in, "adam step");
  c.adam.m = read_vector(in, "adam-m");
  c.adam.v = read_vector(in, "adam-v");
  if (c.adam.m.size() != c.adam.v.size() ||
      (c.adam.m.size() != 0 && c.adam.m.size() != c.params.parameter_count()))
    throw Error(ErrorKind::ParseError, "optimizer state does not match the parameters");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
    write_checkpoint(out, c);
    if (!out) throw Error(ErrorKind::InvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read " + path.string());
  return read_checkpoint(in);
}

bool DivergenceDetector::push(double loss) {
  current_.push_back(loss);
  if (static_cast<int>(current_.size()) < window_) return true;
  auto mid = current_.begin() + static_cast<std::ptrdiff_t>(current_.size() / 2);
  std::nth_element(current_.begin(), mid, current_.end());
  const double median = *mid;
  current_.clear();
  if (!have_best_ || median < best_) {
    best_ = median;
    have_best_ = true;
    return true;
  }
  return !(median > factor_ * best_);
}

TrainResult train(const LossSource& source, Checkpoint start, const TrainingConfig& config,
                  const TrainOutputs& outputs) {
  config.validate();
  keep_large_blocks_on_heap();
  if (config.batch_mode == BatchMode::MiniBatch && !source.sample)
    throw Error(ErrorKind::InvalidArgument, "mini-batch training needs a sampler");
  TrainResult result{std::move(start), {}};
  Checkpoint& state = result.state;
  Eigen::VectorXd theta = flatten(state.params);
  if (state.adam.m.size() == 0) state.adam = adam_init(theta.size());

  const EvalOptions eval{config.threads, config.chunk};
  DivergenceDetector detector(config.divergence_window, config.divergence_factor);
  // A resumed run keeps the earlier rows of an existing log.
  double elapsed_before = 0.0;
  if (outputs.log && state.iteration > 0 && std::filesystem::exists(*outputs.log)) {
    std::ifstream in(*outputs.log);
    for (const auto& r : TrainingLog::read_csv(in).records)
      if (r.iteration <= state.iteration) result.log.records.push_back(r);
    if (!result.log.records.empty()) elapsed_before = result.log.records.back().seconds;
  }
  const auto clock_start = std::chrono::steady_clock::now();
  auto flush_log = [&] {
    if (outputs.log) result.log.write_csv(*outputs.log);
  };

  for (int it = state.iteration + 1; it <= config.iterations; ++it) {
    const bool log_now = it % config.log_every == 0 || it == config.iterations;
    LossEvaluation<double> step;
    LossBreakdown logged;
    if (config.batch_mode == BatchMode::FullBatch) {
      step = evaluate_loss(state.params, source.full(), config.weights, eval);
      logged = step.breakdown;
    } else {
      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(it)));
      const auto batch = source.sample(rng, config.batch_size);
      step = evaluate_loss(state.params, batch, config.weights, eval);
      if (log_now) logged = loss_breakdown(state.params, source.full(), config.weights, eval);
    }
    if (!detector.push(step.breakdown.total)) {
      flush_log();
      throw Error(ErrorKind::Diverged, "windowed median loss grew more than " +
                                           format_double(config.divergence_factor) + "x at iteration " +
                                           std::to_string(it));
    }
    adam_step(theta, step.gradient, state.adam, config);
    unflatten(state.params, theta);
    state.iteration = it;

    if (log_now) {
      const double seconds =
          elapsed_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      const LogRecord r{it,
                        logged.total,
                        logged.pde_residual,
                        logged.normal_grad_penalty,
                        logged.hessian_penalty,
                        logged.initial_misfit,
                        seconds};
      result.log.records.push_back(r);
      if (outputs.on_log) outputs.on_log(r);
      flush_log();
    }
    if (outputs.checkpoint && (it % config.checkpoint_every == 0 || it == config.iterations))
      save_checkpoint(*outputs.checkpoint, state);
  }
  flush_log();
  return result;
}

}  // namespace surfpinn
