#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "surfpinn/irk.hpp"
#include "surfpinn/text_io.hpp"

namespace surfpinn::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

template <typename T>
void read_field(const json& obj, const char* key, const std::string& path, T& target) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "field '" + path + key + "': " + e.what());
  }
}

template <typename T>
void read_field(const json& obj, const char* key, const std::string& path, std::optional<T>& target) {
  if (!obj.contains(key)) return;
  T value{};
  read_field(obj, key, path, value);
  target = value;
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw Error(ErrorKind::ParseError, "field '" + path + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw Error(ErrorKind::ParseError, "unknown field '" + path + key + "'");
  }
}

template <typename T>
void write_optional(json& obj, const char* key, const std::optional<T>& value) {
  if (value) obj[key] = *value;
}

int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string time_tag(double t) { return format_double(t); }

int fail(std::ostream& err, const std::exception& e, int code) {
  err << "error: " << e.what() << '\n';
  return code;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::NonFiniteUpdate:
    case ErrorKind::Diverged:
      return kTrainingAbort;
    default:
      return kUsage;
  }
}

SurfaceModel surface_by_name(const std::string& name) {
  if (name == "sphere") return SurfaceModel::sphere(1.0);
  if (name == "torus") return SurfaceModel::implicit_torus(1.0, 0.25);
  if (name == "parametric-torus") return SurfaceModel::parametric_torus(1.0, 0.25);
  throw Error(ErrorKind::InvalidArgument, "unknown surface '" + name + "' (sphere, torus, parametric-torus)");
}

json build_info() {
  return {{"surfpinn", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

ProblemSpec RunConfig::problem_spec() const {
  ProblemSpec spec = make_problem(problem.problem, problem.solution);
  if (problem.horizon) spec.horizon = *problem.horizon;
  if (problem.reference_horizon) spec.reference_horizon = *problem.reference_horizon;
  if (problem.stages) spec.stages = *problem.stages;
  if (problem.n_space) spec.n_space = *problem.n_space;
  if (problem.n_time) spec.n_time = *problem.n_time;
  if (problem.n_initial) spec.n_initial = *problem.n_initial;
  if (problem.n_eval) spec.n_eval = *problem.n_eval;
  if (problem.seed) spec.seed = *problem.seed;
  if (spec.mode == SolverMode::Discrete) gauss_legendre_tableau(spec.stages);
  return spec;
}

std::vector<int> RunConfig::network_layers() const { return layers ? *layers : problem_spec().network_layers(); }

RunConfig config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "", {"problem", "training", "network", "out", "resume"});
  if (j.contains("problem")) {
    const auto& p = j["problem"];
    reject_unknown(p, "problem.", {"name", "solution", "horizon", "reference_horizon", "stages", "n_space", "n_time",
                                   "n_initial", "n_eval", "seed"});
    auto& o = c.problem;
    read_field(p, "name", "problem.", o.problem);
    read_field(p, "solution", "problem.", o.solution);
    read_field(p, "horizon", "problem.", o.horizon);
    read_field(p, "reference_horizon", "problem.", o.reference_horizon);
    read_field(p, "stages", "problem.", o.stages);
    read_field(p, "n_space", "problem.", o.n_space);
    read_field(p, "n_time", "problem.", o.n_time);
    read_field(p, "n_initial", "problem.", o.n_initial);
    read_field(p, "n_eval", "problem.", o.n_eval);
    read_field(p, "seed", "problem.", o.seed);
  }
  c.training.threads = default_threads();
  if (j.contains("training")) {
    const auto& t = j["training"];
    reject_unknown(t, "training.", {"iterations", "learning_rate", "beta1", "beta2", "adam_eps", "batch_mode",
                                    "batch_size", "seed", "log_every", "checkpoint_every", "threads", "chunk",
                                    "divergence_window", "divergence_factor", "weights"});
    auto& tc = c.training;
    read_field(t, "iterations", "training.", tc.iterations);
    read_field(t, "learning_rate", "training.", tc.learning_rate);
    read_field(t, "beta1", "training.", tc.beta1);
    read_field(t, "beta2", "training.", tc.beta2);
    read_field(t, "adam_eps", "training.", tc.adam_eps);
    std::string mode = "full";
    read_field(t, "batch_mode", "training.", mode);
    if (mode != "full" && mode != "mini")
      throw Error(ErrorKind::ParseError, "field 'training.batch_mode' must be \"full\" or \"mini\"");
    tc.batch_mode = mode == "mini" ? BatchMode::MiniBatch : BatchMode::FullBatch;
    read_field(t, "batch_size", "training.", tc.batch_size);
    read_field(t, "seed", "training.", tc.seed);
    read_field(t, "log_every", "training.", tc.log_every);
    read_field(t, "checkpoint_every", "training.", tc.checkpoint_every);
    read_field(t, "threads", "training.", tc.threads);
    read_field(t, "chunk", "training.", tc.chunk);
    read_field(t, "divergence_window", "training.", tc.divergence_window);
    read_field(t, "divergence_factor", "training.", tc.divergence_factor);
    if (t.contains("weights")) {
      const auto& w = t["weights"];
      reject_unknown(w, "training.weights.", {"residual", "normal_grad", "hessian", "initial"});
      read_field(w, "residual", "training.weights.", tc.weights.residual);
      read_field(w, "normal_grad", "training.weights.", tc.weights.normal_grad);
      read_field(w, "hessian", "training.weights.", tc.weights.hessian);
      read_field(w, "initial", "training.weights.", tc.weights.initial);
    }
  }
  if (j.contains("network")) {
    const auto& n = j["network"];
    reject_unknown(n, "network.", {"layers", "seed"});
    read_field(n, "layers", "network.", c.layers);
    read_field(n, "seed", "network.", c.init_seed);
  }
  read_field(j, "out", "", c.out);
  read_field(j, "resume", "", c.resume);
  return c;
}

json config_to_json(const RunConfig& c) {
  json problem = {{"name", c.problem.problem}};
  if (!c.problem.solution.empty()) problem["solution"] = c.problem.solution;
  write_optional(problem, "horizon", c.problem.horizon);
  write_optional(problem, "reference_horizon", c.problem.reference_horizon);
  write_optional(problem, "stages", c.problem.stages);
  write_optional(problem, "n_space", c.problem.n_space);
  write_optional(problem, "n_time", c.problem.n_time);
  write_optional(problem, "n_initial", c.problem.n_initial);
  write_optional(problem, "n_eval", c.problem.n_eval);
  write_optional(problem, "seed", c.problem.seed);
  const auto& t = c.training;
  json training = {{"iterations", t.iterations},
                   {"learning_rate", t.learning_rate},
                   {"beta1", t.beta1},
                   {"beta2", t.beta2},
                   {"adam_eps", t.adam_eps},
                   {"batch_mode", t.batch_mode == BatchMode::MiniBatch ? "mini" : "full"},
                   {"batch_size", t.batch_size},
                   {"seed", t.seed},
                   {"log_every", t.log_every},
                   {"checkpoint_every", t.checkpoint_every},
                   {"threads", t.threads},
                   {"chunk", t.chunk},
                   {"divergence_window", t.divergence_window},
                   {"divergence_factor", t.divergence_factor},
                   {"weights",
                    {{"residual", t.weights.residual},
                     {"normal_grad", t.weights.normal_grad},
                     {"hessian", t.weights.hessian},
                     {"initial", t.weights.initial}}}};
  json network = {{"seed", c.init_seed}};
  if (c.layers) network["layers"] = *c.layers;
  return {{"problem", problem}, {"training", training}, {"network", network}, {"out", c.out}, {"resume", c.resume}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("build")) return config_from_json(j["config"]);
  return config_from_json(j);
}

std::vector<int> parse_hidden(const std::string& text, int inputs, int outputs) {
  int depth = 0, width = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> depth >> x >> width) || x != 'x' || in.peek() != EOF || depth < 1 || width < 1)
    throw Error(ErrorKind::InvalidArgument, "expected <layers>x<width>, got '" + text + "'");
  std::vector<int> sizes{inputs};
  sizes.insert(sizes.end(), static_cast<std::size_t>(depth), width);
  sizes.push_back(outputs);
  return sizes;
}

namespace {

struct TrainFlags {
  std::string config;
  std::string problem;
  std::string solution;
  std::string out;
  std::optional<int> iterations;
  std::optional<int> stages;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate;
  std::optional<long> batch_size;
  std::optional<int> n_space;
  std::optional<int> n_time;
  bool resume = false;
  bool quiet = false;
};

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c;
  c.training.threads = default_threads();
  if (!f.config.empty()) c = load_config(f.config);
  if (!f.problem.empty()) c.problem.problem = f.problem;
  if (!f.solution.empty()) c.problem.solution = f.solution;
  if (!f.out.empty()) c.out = f.out;
  if (f.iterations) c.training.iterations = *f.iterations;
  if (f.stages) c.problem.stages = *f.stages;
  if (f.threads) c.training.threads = *f.threads;
  if (f.seed) c.training.seed = c.init_seed = *f.seed;
  if (f.learning_rate) c.training.learning_rate = *f.learning_rate;
  if (f.batch_size) {
    c.training.batch_mode = BatchMode::MiniBatch;
    c.training.batch_size = *f.batch_size;
  }
  if (f.n_space) c.problem.n_space = *f.n_space;
  if (f.n_time) c.problem.n_time = *f.n_time;
  if (f.resume) c.resume = true;

  const ProblemSpec spec = c.problem_spec();
  c.training.validate();
  const auto layers = c.network_layers();
  if (layers.front() != spec.network_layers().front() || layers.back() != spec.network_layers().back())
    throw Error(ErrorKind::ShapeMismatch, "network layers do not fit the problem's inputs and outputs");

  const std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  const auto checkpoint_path = dir / "checkpoint";
  write_json(dir / "manifest.json", {{"config", config_to_json(c)},
                                     {"seeds",
                                      {{"problem", spec.seed},
                                       {"training", c.training.seed},
                                       {"network", c.init_seed}}},
                                     {"build", build_info()}});

  Checkpoint start{init_params(layers, c.init_seed), {}, 0};
  if (c.resume && std::filesystem::exists(checkpoint_path)) {
    start = load_checkpoint(checkpoint_path);
    out << "resuming from iteration " << start.iteration << '\n';
  }
  const auto colloc = make_collocation(spec);
  const ProblemLoss loss = make_loss(spec, colloc);
  TrainOutputs outputs{checkpoint_path, dir / "log.csv", nullptr};
  if (!f.quiet) {
    outputs.on_log = [&out](const LogRecord& r) {
      out << "iter " << r.iteration << "  loss " << r.total << "  pde " << r.pde << "  ng " << r.ng << "  hess "
          << r.hess << "  init " << r.init << "  (" << std::fixed << std::setprecision(1) << r.seconds << " s)"
          << std::defaultfloat << std::setprecision(6) << '\n';
    };
  }
  try {
    const auto result = train(loss.source(), start, c.training, outputs);
    save_checkpoint(checkpoint_path, result.state);
    out << "trained " << spec.name << " for " << result.state.iteration << " iterations; artifacts in " << dir.string()
        << '\n';
  } catch (const Error& e) {
    err << "training aborted: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

struct EvalFlags {
  std::string run;
  std::string config;
  std::string checkpoint;
  std::string problem;
  std::string solution;
  std::string out;
  std::vector<double> times;
  int resolution = 128;
};

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::filesystem::path checkpoint_path = f.checkpoint;
  std::filesystem::path dir = f.out;
  if (!f.run.empty()) {
    c = load_config(std::filesystem::path(f.run) / "manifest.json");
    if (checkpoint_path.empty()) checkpoint_path = std::filesystem::path(f.run) / "checkpoint";
    if (dir.empty()) dir = f.run;
  } else if (!f.config.empty()) {
    c = load_config(f.config);
  }
  if (!f.problem.empty()) c.problem.problem = f.problem;
  if (!f.solution.empty()) c.problem.solution = f.solution;
  if (checkpoint_path.empty()) throw Error(ErrorKind::InvalidArgument, "eval needs --run or --checkpoint");
  if (!std::filesystem::exists(checkpoint_path))
    throw Error(ErrorKind::InvalidArgument, "checkpoint not found: " + checkpoint_path.string());
  if (dir.empty()) dir = ".";
  std::filesystem::create_directories(dir);

  const ProblemSpec spec = c.problem_spec();
  const auto params = load_checkpoint(checkpoint_path).params;
  const auto times = f.times.empty() ? spec.report_times : f.times;
  const auto eval = evaluation_points(spec.surface, spec.n_eval, spec.seed);

  if (spec.exact) {
    const auto report = error_report(params, spec, times);
    report.write_csv(dir / "errors.csv");
    for (const auto& r : report.rows) out << "t = " << r.t << "  Err = " << r.err << '\n';
  } else {
    err << "warning: " << spec.name << " has no exact solution; writing field dumps only\n";
  }
  for (double t : times) write_field_csv(dir / ("fields_t" + time_tag(t) + ".csv"), params, spec, eval, t);

  std::ofstream heat(dir / "heat.csv");
  heat << "t,heat_content\n";
  for (double t : times) {
    const double h = heat_content(params, spec, t, f.resolution);
    heat << format_double(t) << ',' << format_double(h) << '\n';
    out << "t = " << t << "  heat content = " << h << '\n';
  }
  return kOk;
}

struct VerifyFlags {
  std::string surface = "sphere";
  int trials = 20;
  std::uint64_t seed = 1;
  int resolution = 48;
  double fd_step = 1e-4;
  std::string out = ".";
};

int cmd_verify(const VerifyFlags& f, std::ostream& out) {
  if (f.trials < 0) throw Error(ErrorKind::InvalidCount, "trials must be non-negative");
  const auto surface = surface_by_name(f.surface);
  const auto fields = random_theorem_fields(f.trials, f.seed);
  TheoremOptions options;
  options.resolution = f.resolution;
  options.fd_step = f.fd_step;
  const auto report = verify_theorem(surface, fields, options);
  std::filesystem::create_directories(f.out);
  report.write_csv(std::filesystem::path(f.out) / "theorem.csv");
  const auto failures = std::count_if(report.rows.begin(), report.rows.end(), [](auto& r) { return !r.passed(); });
  out << surface.name() << ": " << report.rows.size() << " inequality rows, " << failures << " violated, sup|H| = "
      << report.sup_abs_mean_curvature << ", C = " << report.constant << '\n';
  return report.all_passed() ? kOk : kCheckFailed;
}

int cmd_tableau(int q, const std::string& save, std::ostream& out) {
  const auto t = gauss_legendre_tableau(q);
  out << std::setprecision(17);
  out << "c:";
  for (Eigen::Index i = 0; i < t.c.size(); ++i) out << ' ' << t.c(i);
  out << "\nb:";
  for (Eigen::Index i = 0; i < t.b.size(); ++i) out << ' ' << t.b(i);
  out << "\na:\n";
  for (Eigen::Index i = 0; i < t.a.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.a.cols(); ++j) out << (j ? " " : "  ") << t.a(i, j);
    out << '\n';
  }
  out << std::setprecision(3) << "order " << 2 * q << " residual: " << order_check(t, 2 * q) << '\n';
  if (!save.empty()) save_tableau(save, t);
  return kOk;
}

struct FdFlags {
  std::string hidden = "4x20";
  std::uint64_t seed = 7;
  int points = 5;
  double step = 1e-6;
  std::string precision = "long";
  double tolerance = 1e-6;
};

int cmd_fd_check(const FdFlags& f, std::ostream& out) {
  if (f.precision != "long" && f.precision != "double")
    throw Error(ErrorKind::InvalidArgument, "precision must be 'long' or 'double'");
  const auto layers = parse_hidden(f.hidden, 4, 1);
  const auto r = continuous_fd_check(layers, f.seed, f.points, f.step, f.precision == "long");
  out << "fd-check " << f.hidden << " (" << f.precision << ", step " << f.step << "): max relative discrepancy "
      << r.max_relative_error << " at parameter " << r.worst_index << " (analytic " << r.analytic_at_worst
      << ", numeric " << r.numeric_at_worst << ")\n";
  return r.max_relative_error <= f.tolerance ? kOk : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physics-informed neural network solver for heat equations on surfaces", "surfpinn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a network on a registered problem");
  train_cmd->add_option("--config", tf.config, "JSON config file or run manifest");
  train_cmd->add_option("--problem", tf.problem, "Problem name");
  train_cmd->add_option("--solution", tf.solution, "Exact solution (product-exp, sine-mix)");
  train_cmd->add_option("--out", tf.out, "Output directory");
  train_cmd->add_option("--iterations", tf.iterations, "Adam iterations");
  train_cmd->add_option("--stages", tf.stages, "Runge-Kutta stages for discrete problems");
  train_cmd->add_option("--threads", tf.threads, "Worker threads (1 is the reference path)");
  train_cmd->add_option("--seed", tf.seed, "Seed for network init and mini-batches");
  train_cmd->add_option("--learning-rate", tf.learning_rate, "Adam step size");
  train_cmd->add_option("--batch-size", tf.batch_size, "Mini-batch size (enables mini-batch mode)");
  train_cmd->add_option("--n-space", tf.n_space, "Spatial collocation count");
  train_cmd->add_option("--n-time", tf.n_time, "Time partition count");
  train_cmd->add_flag("--resume", tf.resume, "Continue from the checkpoint in --out");
  train_cmd->add_flag("--quiet", tf.quiet, "No progress lines");

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained network");
  eval_cmd->add_option("--run", ef.run, "Run directory written by train");
  eval_cmd->add_option("--config", ef.config, "Config file (with --checkpoint)");
  eval_cmd->add_option("--checkpoint", ef.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--problem", ef.problem, "Problem name");
  eval_cmd->add_option("--solution", ef.solution, "Exact solution");
  eval_cmd->add_option("--out", ef.out, "Output directory");
  eval_cmd->add_option("--times", ef.times, "Evaluation times")->delimiter(',');
  eval_cmd->add_option("--resolution", ef.resolution, "Quadrature resolution for heat content");

  VerifyFlags vf;
  auto* verify_cmd = app.add_subcommand("verify", "Check the surface operator estimates on random fields");
  verify_cmd->add_option("--surface", vf.surface, "sphere, torus or parametric-torus");
  verify_cmd->add_option("--trials", vf.trials, "Random trials");
  verify_cmd->add_option("--seed", vf.seed, "Seed for the random fields");
  verify_cmd->add_option("--resolution", vf.resolution, "Quadrature resolution");
  verify_cmd->add_option("--fd-step", vf.fd_step, "Finite-difference step");
  verify_cmd->add_option("--out", vf.out, "Output directory for theorem.csv");

  int stages = 0;
  std::string save;
  auto* tableau_cmd = app.add_subcommand("tableau", "Print a Gauss-Legendre Butcher tableau");
  tableau_cmd->add_option("q", stages, "Stage count")->required();
  tableau_cmd->add_option("--save", save, "Write the tableau cache file");

  FdFlags ff;
  auto* fd_cmd = app.add_subcommand("fd-check", "Compare loss gradients with central differences");
  fd_cmd->add_option("layers", ff.hidden, "Hidden layers as <count>x<width>");
  fd_cmd->add_option("--seed", ff.seed, "Network init seed");
  fd_cmd->add_option("--points", ff.points, "Collocation points");
  fd_cmd->add_option("--step", ff.step, "Central difference step");
  fd_cmd->add_option("--precision", ff.precision, "long or double");
  fd_cmd->add_option("--tolerance", ff.tolerance, "Pass threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream usage, errors;
    const int code = app.exit(e, usage, errors);
    out << usage.str();
    err << errors.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(tf, out, err);
    if (*eval_cmd) return cmd_eval(ef, out, err);
    if (*verify_cmd) return cmd_verify(vf, out);
    if (*tableau_cmd) return cmd_tableau(stages, save, out);
    if (*fd_cmd) return cmd_fd_check(ff, out);
  } catch (const Error& e) {
    return fail(err, e, exit_code_for(e));
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(err, e, kUsage);
  }
  return kUsage;
}

}  // namespace surfpinn::cli
