#include "surfpinn/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "surfpinn/random.hpp"
#include "surfpinn/text_io.hpp"

namespace surfpinn {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  return out;
}

// Cubic Lagrange interpolation through the four nodes nearest to t.
double interpolate(const std::vector<double>& times, const Eigen::VectorXd& values, double t) {
  const auto n = static_cast<int>(times.size());
  if (n == 1) return values(0);
  const int width = std::min(4, n);
  const int upper = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  const int first = std::clamp(upper - width / 2, 0, n - width);
  double sum = 0.0;
  for (int j = first; j < first + width; ++j) {
    double basis = 1.0;
    for (int k = first; k < first + width; ++k)
      if (k != j) basis *= (t - times[static_cast<std::size_t>(k)]) / (times[static_cast<std::size_t>(j)] - times[static_cast<std::size_t>(k)]);
    sum += basis * values(j);
  }
  return sum;
}

}  // namespace

int ProblemSpec::n_interior() const {
  if (sampling == SamplingScheme::LatinHypercube) return n_space;
  return mode == SolverMode::Continuous ? n_space * n_time : n_space;
}

TimeRescaling ProblemSpec::rescaling() const {
  if (reference_horizon <= 0.0) return {horizon, horizon};
  return rescale_time(horizon, reference_horizon);
}

std::vector<int> ProblemSpec::network_layers() const {
  return mode == SolverMode::Continuous ? continuous_preset() : discrete_preset(stages);
}

double product_exp(const Vec3& x, double t) { return x(0) * x(1) * x(2) * std::exp(t); }

double sine_mix(const Vec3& x, double t) { return x(0) * std::sin(t * x(1)) + x(2); }

PdeRhs manufactured_rhs(const SurfaceModel& surface, SpaceTimeField exact, double time_step) {
  return {[surface, exact, time_step](const Vec3& x, double t) {
            const double dudt = (exact(x, t + time_step) - exact(x, t - time_step)) / (2 * time_step);
            const double lap = laplace_beltrami(surface, [&](const Vec3& y) { return exact(y, t); }, x);
            return dudt - lap;
          },
          RhsProvenance::OracleManufactured};
}

double torus_forcing(const Vec3& x, double eps) {
  const double d = (x - Vec3(0, 1, 0)).norm();
  if (eps <= 0.0) return d <= 0.25 ? 100.0 : 0.0;
  return 50.0 * (1.0 + std::tanh((0.25 - d) / eps));
}

std::vector<std::string> problem_names() {
  return {"sphere-continuous", "torus-heating", "sphere-discrete-short", "sphere-discrete-long"};
}

ProblemSpec make_problem(const std::string& name, const std::string& solution) {
  ProblemSpec p;
  p.name = name;
  auto set_exact = [&p](const std::string& which) {
    if (which == "product-exp") {
      p.exact = product_exp;
    } else if (which == "sine-mix") {
      p.exact = sine_mix;
    } else {
      throw Error(ErrorKind::UnknownProblem, "unknown exact solution '" + which + "' (product-exp, sine-mix)");
    }
    p.solution = which;
    const SpaceTimeField exact = *p.exact;
    p.u0 = [exact](const Vec3& x) { return exact(x, 0.0); };
    p.rhs = manufactured_rhs(p.surface, exact);
  };

  if (name == "sphere-continuous") {
    p.mode = SolverMode::Continuous;
    p.horizon = 1.0;
    p.n_space = 500;
    p.n_time = 100;
    p.report_times = {0.25, 0.5, 0.75, 1.0};
    set_exact(solution.empty() ? "sine-mix" : solution);
  } else if (name == "torus-heating") {
    if (!solution.empty()) throw Error(ErrorKind::UnknownProblem, "torus-heating has no exact solution to select");
    p.surface = SurfaceModel::implicit_torus(1.0, 0.25);
    p.mode = SolverMode::Continuous;
    p.horizon = 3.0;
    p.sampling = SamplingScheme::LatinHypercube;
    p.n_space = 50000;
    p.n_initial = 5000;
    p.rhs = {[](const Vec3& x, double) { return torus_forcing(x, 0.05); }, RhsProvenance::Analytic};
    p.u0 = [](const Vec3&) { return 0.0; };
    p.report_times = {0.0, 0.75, 1.5, 2.25, 3.0};
  } else if (name == "sphere-discrete-short") {
    p.mode = SolverMode::Discrete;
    p.stages = 8;
    p.horizon = 0.5;
    p.n_space = 500;
    p.report_times = {0.5};
    set_exact(solution.empty() ? "product-exp" : solution);
  } else if (name == "sphere-discrete-long") {
    p.mode = SolverMode::Discrete;
    p.stages = 8;
    p.horizon = 3.0;
    p.reference_horizon = 0.5;
    p.n_space = 500;
    p.report_times = {3.0};
    set_exact(solution.empty() ? "product-exp" : solution);
  } else {
    throw Error(ErrorKind::UnknownProblem, "no problem named '" + name + "'");
  }
  return p;
}

CollocationSet make_collocation(const ProblemSpec& p) {
  CollocationSet c;
  c.seed = p.seed;
  if (p.sampling == SamplingScheme::FibonacciTensor) {
    const auto lattice = map_to_surface(fibonacci_sphere(p.n_space), p.surface);
    if (p.mode == SolverMode::Continuous) c.interior = tensor_time(lattice, p.horizon, p.n_time);
    c.initial = lattice;
  } else {
    c.interior = lhs_parametric(p.n_space, p.surface, p.horizon, derive_seed(p.seed, 1));
    for (const auto& s : lhs_parametric(p.n_initial, p.surface, 0.0, derive_seed(p.seed, 2))) c.initial.push_back(s.x);
  }
  c.eval = evaluation_points(p.surface, p.n_eval, p.seed);
  return c;
}

LossSource ProblemLoss::source() const {
  LossSource s;
  s.full = [this]() -> const ResidualBatch<double>& { return full; };
  if (continuous)
    s.sample = [this](Rng& rng, Eigen::Index n) { return continuous->sample(rng, n).batch(); };
  else
    s.sample = [this](Rng& rng, Eigen::Index n) { return discrete->sample(rng, n).batch(); };
  return s;
}

ProblemLoss make_loss(const ProblemSpec& p, const CollocationSet& colloc) {
  ProblemLoss loss;
  if (p.mode == SolverMode::Continuous) {
    loss.continuous = continuous_data(p.surface, colloc, p.rhs, p.u0, p.horizon);
    loss.full = loss.continuous->batch();
  } else {
    const auto r = p.rescaling();
    loss.discrete = discrete_data(p.surface, colloc.initial, gauss_legendre_tableau(p.stages), r.reference, p.rhs,
                                  p.u0, r.multiplier());
    loss.full = loss.discrete->batch();
  }
  return loss;
}

std::vector<double> discrete_node_times(const ProblemSpec& p) {
  const auto tableau = gauss_legendre_tableau(p.stages);
  std::vector<double> times{0.0};
  for (int j = 0; j < p.stages; ++j) times.push_back(tableau.c(j) * p.horizon);
  times.push_back(p.horizon);
  return times;
}

Eigen::VectorXd predict(const MlpParamsd& params, const ProblemSpec& p, std::span<const Vec3> points, double t) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (p.mode == SolverMode::Continuous) {
    if (params.input_dim() != 4 || params.output_dim() != 1)
      throw Error(ErrorKind::ShapeMismatch, "continuous problems need a (4 -> 1) network");
    Eigen::MatrixXd in(4, n);
    for (Eigen::Index i = 0; i < n; ++i) in.col(i) << points[static_cast<std::size_t>(i)], t / p.horizon;
    return forward_batch(params, in).row(0).transpose();
  }
  if (params.input_dim() != 3 || params.output_dim() != p.stages + 1)
    throw Error(ErrorKind::TableauMismatch, "discrete network must have 3 inputs and q + 1 heads");
  Eigen::MatrixXd in(3, n);
  for (Eigen::Index i = 0; i < n; ++i) in.col(i) = points[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd heads = forward_batch(params, in);
  const auto times = discrete_node_times(p);
  Eigen::VectorXd out(n);
  const double tol = 1e-12 * std::max(1.0, p.horizon);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd values(static_cast<Eigen::Index>(times.size()));
    values(0) = p.u0(points[static_cast<std::size_t>(i)]);
    values.tail(heads.rows()) = heads.col(i);
    const auto hit = std::find_if(times.begin(), times.end(), [&](double s) { return std::abs(s - t) <= tol; });
    out(i) = hit != times.end() ? values(hit - times.begin()) : interpolate(times, values, t);
  }
  return out;
}

double relative_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) {
  if (predicted.size() != exact.size()) throw Error(ErrorKind::ShapeMismatch, "prediction and exact sizes differ");
  const double denom = exact.squaredNorm();
  if (denom < 1e-30) throw Error(ErrorKind::ZeroDenominator, "exact solution vanishes on the evaluation set");
  return std::sqrt((predicted - exact).squaredNorm() / denom);
}

double relative_error(const MlpParamsd& params, const ProblemSpec& p, std::span<const Vec3> points, double t) {
  if (!p.exact) throw Error(ErrorKind::NoExactSolution, p.name + " has no exact solution");
  Eigen::VectorXd exact(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) exact(static_cast<Eigen::Index>(i)) = (*p.exact)(points[i], t);
  return relative_error(predict(params, p, points, t), exact);
}

void ErrorReport::write_csv(const std::filesystem::path& path) const {
  auto out = open_csv(path);
  out << "t,err,n_eval,seed\n";
  for (const auto& r : rows) out << format_double(r.t) << ',' << format_double(r.err) << ',' << r.n_eval << ',' << r.seed << '\n';
}

ErrorReport error_report(const MlpParamsd& params, const ProblemSpec& p, std::span<const double> times) {
  const auto eval = evaluation_points(p.surface, p.n_eval, p.seed);
  ErrorReport report;
  for (double t : times) report.rows.push_back({t, relative_error(params, p, eval, t), p.n_eval, p.seed});
  return report;
}

void write_field_csv(const std::filesystem::path& path, const MlpParamsd& params, const ProblemSpec& p,
                     std::span<const Vec3> points, double t) {
  const Eigen::VectorXd u = predict(params, p, points, t);
  auto out = open_csv(path);
  out << "x,y,z,t,u_pred,u_exact,abs_err\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& x = points[i];
    const double pred = u(static_cast<Eigen::Index>(i));
    out << format_double(x(0)) << ',' << format_double(x(1)) << ',' << format_double(x(2)) << ',' << format_double(t)
        << ',' << format_double(pred) << ',';
    if (p.exact) {
      const double e = (*p.exact)(x, t);
      out << format_double(e) << ',' << format_double(std::abs(pred - e));
    } else {
      out << ',';
    }
    out << '\n';
  }
}

double heat_content(const MlpParamsd& params, const ProblemSpec& p, double t, int resolution) {
  const auto rule = quadrature_rule(p.surface, resolution);
  const Eigen::VectorXd u = predict(params, p, rule.nodes, t);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * u(static_cast<Eigen::Index>(i));
  return sum;
}

TrainResult train_problem(const ProblemSpec& p, const MlpParamsd& init, const TrainingConfig& config,
                          const TrainOutputs& outputs) {
  if (init.layer_sizes.front() != p.network_layers().front() || init.output_dim() != p.network_layers().back())
    throw Error(p.mode == SolverMode::Discrete ? ErrorKind::TableauMismatch : ErrorKind::ShapeMismatch,
                "network shape does not match the problem mode");
  const auto colloc = make_collocation(p);
  const ProblemLoss loss = make_loss(p, colloc);
  return train(loss.source(), {init, {}, 0}, config, outputs);
}

FdReport continuous_fd_check(const std::vector<int>& layers, std::uint64_t seed, int points, double step,
                             bool extended_precision) {
  if (points < 1) throw Error(ErrorKind::InvalidCount, "fd check needs at least one point");
  keep_large_blocks_on_heap();
  const auto problem = make_problem("sphere-continuous");
  const auto lattice = fibonacci_sphere(points);
  std::vector<SpaceTimePoint> interior;
  Eigen::VectorXd f(points), u0(points);
  for (int i = 0; i < points; ++i) {
    const auto& x = lattice[static_cast<std::size_t>(i)];
    const double t = points == 1 ? 0.5 : static_cast<double>(i) / (points - 1);
    interior.push_back({x, t});
    f(i) = problem.rhs(x, t);
    u0(i) = problem.u0(x);
  }
  const auto normals = normals_at(problem.surface, std::span<const Vec3>(lattice));
  const auto params = init_params(layers, seed);
  auto run = [&]<typename S>(const MlpParams<S>& p) {
    const auto batch = continuous_batch<S>(interior, normals, f, lattice, normals, u0, 1.0);
    return fd_check(p, batch.inputs, batch.probes, total_assembler(batch), step);
  };
  if (extended_precision) return run(params.cast<long double>());
  return run(params);
}

// Theorem verification ------------------------------------------------------

namespace {

struct EstimateSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

struct TrialNorms {
  std::array<EstimateSides, 3> sides;
};

TrialNorms trial_norms(const SurfaceModel& surface, const TheoremFields& fields, const QuadratureRule& rule,
                       double constant, const OracleOptions& oracle) {
  // Squared L2 norms accumulated by quadrature.
  double grad_lhs = 0, grad_a = 0, normal_a = 0;
  double div_lhs = 0, div_a = 0, div_b = 0;
  double lap_lhs = 0, lap_a = 0, lap_c = 0;
  const double h = oracle.step;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const Vec3& x = rule.nodes[i];
    const double w = rule.weights[i];
    const Vec3 n = normal(surface, x);
    const Vec3 f = fields.f(x);

    const Vec3 grad = fd_gradient(fields.u, x, h);
    grad_lhs += w * (surface_gradient(surface, fields.u, x, oracle) - f).squaredNorm();
    grad_a += w * (grad - f).squaredNorm();
    normal_a += w * std::pow(n.dot(grad), 2);

    const Mat3 jac = fd_jacobian(fields.v, x, h);
    const double g_div = fields.g_div(x);
    div_lhs += w * std::pow(surface_divergence(surface, fields.v, x, oracle) - g_div, 2);
    div_a += w * std::pow(jac.trace() - g_div, 2);
    div_b += w * std::pow(n.dot(jac * n), 2);

    const Mat3 hess = fd_hessian(fields.u, x, h);
    const double g_lap = fields.g_lap(x);
    lap_lhs += w * std::pow(laplace_beltrami(surface, fields.u, x, oracle) - g_lap, 2);
    lap_a += w * std::pow(hess.trace() - g_lap, 2);
    lap_c += w * std::pow(n.dot(hess * n), 2);
  }
  TrialNorms out;
  out.sides[0] = {std::sqrt(grad_lhs), std::sqrt(grad_a) + std::sqrt(normal_a)};
  out.sides[1] = {std::sqrt(div_lhs), std::sqrt(div_a) + std::sqrt(div_b)};
  out.sides[2] = {std::sqrt(lap_lhs), constant * (std::sqrt(lap_a) + std::sqrt(normal_a) + std::sqrt(lap_c))};
  return out;
}

// Sides that vanish analytically sit at oracle noise, so small absolute
// changes are not a resolution signal.
bool changed(double fine, double coarse) {
  const double delta = std::abs(fine - coarse);
  return delta > 0.01 * std::abs(fine) && delta > 1e-6;
}

// sum_k a_k sin(w_k . x + phi_k) with integer frequencies in [-2, 2].
ScalarField random_trig(Rng& rng) {
  struct Term {
    double a;
    Vec3 w;
    double phase;
  };
  std::vector<Term> terms(3);
  for (auto& t : terms) {
    t.a = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < 3; ++k) t.w(k) = static_cast<double>(rng.below(5)) - 2.0;
    t.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return [terms](const Vec3& x) {
    double s = 0.0;
    for (const auto& t : terms) s += t.a * std::sin(t.w.dot(x) + t.phase);
    return s;
  };
}

VectorField random_trig_vector(Rng& rng) {
  const std::array<ScalarField, 3> c{random_trig(rng), random_trig(rng), random_trig(rng)};
  return [c](const Vec3& x) { return Vec3(c[0](x), c[1](x), c[2](x)); };
}

}  // namespace

bool TheoremReport::all_passed(double tolerance) const {
  return std::all_of(rows.begin(), rows.end(), [&](const TheoremRow& r) { return r.margin >= -tolerance; });
}

void TheoremReport::write_csv(const std::filesystem::path& path) const {
  auto out = open_csv(path);
  out << "trial,estimate,lhs,rhs,C,margin,pass\n";
  for (const auto& r : rows)
    out << r.trial << ',' << r.estimate << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
        << format_double(r.constant) << ',' << format_double(r.margin) << ',' << (r.passed() ? 1 : 0) << '\n';
}

TheoremReport verify_theorem(const SurfaceModel& surface, std::span<const TheoremFields> trials,
                             const TheoremOptions& options) {
  const auto rule = quadrature_rule(surface, options.resolution);
  TheoremReport report;
  for (const auto& x : rule.nodes)
    report.sup_abs_mean_curvature = std::max(report.sup_abs_mean_curvature, std::abs(mean_curvature(surface, x)));
  report.constant = std::max(1.0, 2.0 * report.sup_abs_mean_curvature);
  const OracleOptions oracle{options.fd_step};
  std::optional<QuadratureRule> coarse;
  if (options.check_resolution) coarse = quadrature_rule(surface, std::max(2, options.resolution / 2));

  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto fine = trial_norms(surface, trials[t], rule, report.constant, oracle);
    if (coarse) {
      const auto half = trial_norms(surface, trials[t], *coarse, report.constant, oracle);
      for (std::size_t e = 0; e < 3; ++e)
        if (changed(fine.sides[e].lhs, half.sides[e].lhs) || changed(fine.sides[e].rhs, half.sides[e].rhs))
          throw Error(ErrorKind::QuadratureTooCoarse,
                      "halving the quadrature resolution moved estimate " + std::to_string(e + 1) + " by over 1%");
    }
    for (std::size_t e = 0; e < 3; ++e) {
      TheoremRow row;
      row.trial = static_cast<int>(t);
      row.estimate = static_cast<int>(e) + 1;
      row.lhs = fine.sides[e].lhs;
      row.rhs = fine.sides[e].rhs;
      row.constant = e == 2 ? report.constant : 1.0;
      row.margin = row.rhs * (1 + 1e-6) + 1e-8 - row.lhs;
      report.rows.push_back(row);
    }
  }
  return report;
}

std::vector<TheoremFields> random_theorem_fields(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TheoremFields> out;
  for (int i = 0; i < count; ++i)
    out.push_back({random_trig(rng), random_trig_vector(rng), random_trig_vector(rng), random_trig(rng),
                   random_trig(rng)});
  return out;
}

}  // namespace surfpinn
