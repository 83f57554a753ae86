#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "surfpinn/diffengine.hpp"
#include "surfpinn/geometry.hpp"
#include "surfpinn/irk.hpp"
#include "surfpinn/random.hpp"
#include "surfpinn/sampling.hpp"

namespace surfpinn {

struct LossWeights {
  double residual = 1.0;
  double normal_grad = 1.0;
  double hessian = 1.0;
  double initial = 1.0;
};

struct LossBreakdown {
  double pde_residual = 0.0;
  double normal_grad_penalty = 0.0;
  double hessian_penalty = 0.0;
  double initial_misfit = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Unweighted components in LossBreakdown order.
template <typename Scalar>
using LossComponents = std::array<Scalar, 4>;

LossBreakdown combine(const LossComponents<double>& components, const LossWeights& weights);

enum class RhsProvenance { Analytic, OracleManufactured };

/// Forcing f(x, t) of du/dt = Lap_G u + f.
struct PdeRhs {
  std::function<double(const Vec3&, double)> f;
  RhsProvenance provenance = RhsProvenance::Analytic;

  double operator()(const Vec3& x, double t) const { return f(x, t); }
};

using InitialValue = std::function<double(const Vec3&)>;

/// A loss over a fixed batch of network inputs. `terms` maps output jets of the
/// points [begin, begin + jets.points()) to their component contributions and,
/// when `adjoint` is non-null, writes d(weighted total)/d(jets) into it.
template <typename Scalar>
struct ResidualBatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Terms = std::function<LossComponents<Scalar>(const BatchJets<Scalar>& jets, Eigen::Index begin,
                                                     BatchJets<Scalar>* adjoint, const LossWeights& weights)>;

  Matrix inputs;
  ProbeSet<Scalar> probes;
  int heads = 1;
  Terms terms;

  Eigen::Index size() const { return inputs.cols(); }
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> normal_field(std::span<const Vec3> normals, int input_dim) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> field =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(input_dim, static_cast<Eigen::Index>(normals.size()));
  for (std::size_t i = 0; i < normals.size(); ++i)
    for (int k = 0; k < 3; ++k) field(k, static_cast<Eigen::Index>(i)) = Scalar(normals[i](k));
  return field;
}

// Probes (e0,e0), (e1,e1), (e2,e2), (n,n): the spatial Laplacian is the sum of
// the first three, the normal curvature term is the fourth.
template <typename Scalar>
ProbeSet<Scalar> surface_probes(std::span<const Vec3> normals, int input_dim) {
  ProbeSet<Scalar> probes;
  for (int k = 0; k < 3; ++k) probes.add_pair(probes.add_axis(k), k);
  const int n = probes.add_field(normal_field<Scalar>(normals, input_dim));
  probes.add_pair(n, n);
  return probes;
}

}  // namespace detail

/// Stationary loss: mean |Lap u - f|^2, |<grad u, n>|^2, |n^T Hess u n|^2.
template <typename Scalar = double>
ResidualBatch<Scalar> stationary_batch(std::span<const Vec3> points, std::span<const Vec3> normals,
                                       const Eigen::VectorXd& f) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (static_cast<Eigen::Index>(normals.size()) != n || f.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "points, normals and f must have equal length");
  ResidualBatch<Scalar> batch;
  batch.inputs.resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i) batch.inputs.col(i) = points[static_cast<std::size_t>(i)].cast<Scalar>();
  batch.probes = detail::surface_probes<Scalar>(normals, 3);
  const auto field = batch.probes.directions.back().field;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs = f.cast<Scalar>();
  const Scalar scale = Scalar(1) / Scalar(std::max<Eigen::Index>(n, 1));
  batch.terms = [field, rhs, scale](const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>* adj,
                                    const LossWeights& w) {
    LossComponents<Scalar> c{};
    for (Eigen::Index i = 0; i < jets.points(); ++i) {
      const Eigen::Index g = begin + i;
      const Scalar r = jets.probe(0)(0, i) + jets.probe(1)(0, i) + jets.probe(2)(0, i) - rhs(g);
      Scalar ng(0);
      for (int k = 0; k < 3; ++k) ng += field(k, g) * jets.grad(k)(0, i);
      const Scalar nhn = jets.probe(3)(0, i);
      c[0] += scale * r * r;
      c[1] += scale * ng * ng;
      c[2] += scale * nhn * nhn;
      if (!adj) continue;
      for (int p = 0; p < 3; ++p) adj->probe(p)(0, i) = Scalar(2 * w.residual) * scale * r;
      for (int k = 0; k < 3; ++k) adj->grad(k)(0, i) = Scalar(2 * w.normal_grad) * scale * ng * field(k, g);
      adj->probe(3)(0, i) = Scalar(2 * w.hessian) * scale * nhn;
    }
    return c;
  };
  return batch;
}

/// Continuous-time loss for the network u(x, y, z, s), s = t / T. Interior
/// columns come first, then the initial slice (s = 0). Penalties average over
/// both sets, the PDE residual over the interior, the misfit over the slice.
template <typename Scalar = double>
ResidualBatch<Scalar> continuous_batch(std::span<const SpaceTimePoint> interior,
                                       std::span<const Vec3> interior_normals, const Eigen::VectorXd& f,
                                       std::span<const Vec3> initial, std::span<const Vec3> initial_normals,
                                       const Eigen::VectorXd& u0, double horizon) {
  const auto ni = static_cast<Eigen::Index>(interior.size());
  const auto n0 = static_cast<Eigen::Index>(initial.size());
  if (static_cast<Eigen::Index>(interior_normals.size()) != ni || f.size() != ni ||
      static_cast<Eigen::Index>(initial_normals.size()) != n0 || u0.size() != n0)
    throw Error(ErrorKind::ShapeMismatch, "collocation arrays must have matching lengths");
  if (!(horizon > 0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  ResidualBatch<Scalar> batch;
  batch.inputs.resize(4, ni + n0);
  std::vector<Vec3> normals;
  normals.reserve(static_cast<std::size_t>(ni + n0));
  for (Eigen::Index i = 0; i < ni; ++i) {
    const auto& p = interior[static_cast<std::size_t>(i)];
    batch.inputs.col(i) << Scalar(p.x(0)), Scalar(p.x(1)), Scalar(p.x(2)), Scalar(p.t / horizon);
    normals.push_back(interior_normals[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < n0; ++i) {
    const auto& x = initial[static_cast<std::size_t>(i)];
    batch.inputs.col(ni + i) << Scalar(x(0)), Scalar(x(1)), Scalar(x(2)), Scalar(0);
    normals.push_back(initial_normals[static_cast<std::size_t>(i)]);
  }
  batch.probes = detail::surface_probes<Scalar>(normals, 4);
  const auto field = batch.probes.directions.back().field;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs = f.cast<Scalar>();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> init = u0.cast<Scalar>();
  const Scalar inv_t = Scalar(1) / Scalar(horizon);
  const Scalar s_res = Scalar(1) / Scalar(std::max<Eigen::Index>(ni, 1));
  const Scalar s_pen = Scalar(1) / Scalar(std::max<Eigen::Index>(ni + n0, 1));
  const Scalar s_init = Scalar(1) / Scalar(std::max<Eigen::Index>(n0, 1));
  batch.terms = [=](const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>* adj, const LossWeights& w) {
    LossComponents<Scalar> c{};
    for (Eigen::Index i = 0; i < jets.points(); ++i) {
      const Eigen::Index g = begin + i;
      Scalar ng(0);
      for (int k = 0; k < 3; ++k) ng += field(k, g) * jets.grad(k)(0, i);
      const Scalar nhn = jets.probe(3)(0, i);
      c[1] += s_pen * ng * ng;
      c[2] += s_pen * nhn * nhn;
      if (adj) {
        for (int k = 0; k < 3; ++k) adj->grad(k)(0, i) = Scalar(2 * w.normal_grad) * s_pen * ng * field(k, g);
        adj->probe(3)(0, i) = Scalar(2 * w.hessian) * s_pen * nhn;
      }
      if (g < ni) {
        const Scalar lap = jets.probe(0)(0, i) + jets.probe(1)(0, i) + jets.probe(2)(0, i);
        const Scalar r = inv_t * jets.grad(3)(0, i) - lap - rhs(g);
        c[0] += s_res * r * r;
        if (adj) {
          const Scalar dr = Scalar(2 * w.residual) * s_res * r;
          adj->grad(3)(0, i) = dr * inv_t;
          for (int p = 0; p < 3; ++p) adj->probe(p)(0, i) = -dr;
        }
      } else {
        const Scalar m = jets.value()(0, i) - init(g - ni);
        c[3] += s_init * m * m;
        if (adj) adj->value()(0, i) = Scalar(2 * w.initial) * s_init * m;
      }
    }
    return c;
  };
  return batch;
}

/// One implicit Runge-Kutta step of length dt from u0 for du/dt = m (Lap u + f).
/// Heads 0..q-1 are the stage values, head q the step end value. `f` is
/// points x q (forcing at each stage time). The stage and final predictors
/// u_j - dt m sum_k a_jk N_k and u_{q+1} - dt m sum_k b_k N_k are matched to u0;
/// that misfit is reported as pde_residual. Penalties apply to every head.
template <typename Scalar = double>
ResidualBatch<Scalar> discrete_batch(std::span<const Vec3> points, std::span<const Vec3> normals,
                                     const ButcherTableau& tableau, double dt, const Eigen::MatrixXd& f,
                                     const Eigen::VectorXd& u0, double multiplier = 1.0) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const int q = tableau.q;
  if (static_cast<Eigen::Index>(normals.size()) != n || u0.size() != n || f.rows() != n || f.cols() != q)
    throw Error(ErrorKind::ShapeMismatch, "discrete collocation arrays must have matching shapes");
  ResidualBatch<Scalar> batch;
  batch.heads = q + 1;
  batch.inputs.resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i) batch.inputs.col(i) = points[static_cast<std::size_t>(i)].cast<Scalar>();
  batch.probes = detail::surface_probes<Scalar>(normals, 3);
  const auto field = batch.probes.directions.back().field;

  // Predictor matrix: rows 0..q-1 use a, row q uses b; scaled by dt m.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coeff(q + 1, q);
  coeff.topRows(q) = tableau.a.cast<Scalar>();
  coeff.row(q) = tableau.b.transpose().cast<Scalar>();
  coeff *= Scalar(dt * multiplier);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rhs = f.transpose().cast<Scalar>();  // q x N
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> init = u0.cast<Scalar>();
  const Scalar s_res = Scalar(1) / Scalar(std::max<Eigen::Index>(n * (q + 1), 1));
  const Scalar s_pen = s_res;

  batch.terms = [=](const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>* adj, const LossWeights& w) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    LossComponents<Scalar> c{};
    const Eigen::Index m = jets.points();
    if (jets.rows() != q + 1) throw Error(ErrorKind::TableauMismatch, "head count must equal q + 1");
    // N_k for stage heads: (q x m).
    const Matrix lap = (jets.probe(0) + jets.probe(1) + jets.probe(2)).topRows(q);
    const Matrix stage_n = lap + rhs.middleCols(begin, m);
    Matrix pred = jets.value() - coeff * stage_n;
    pred.rowwise() -= init.segment(begin, m).transpose();
    c[0] = s_res * pred.squaredNorm();
    Matrix ng = Matrix::Zero(q + 1, m);
    for (int k = 0; k < 3; ++k)
      ng.array() += jets.grad(k).array().rowwise() * field.row(k).segment(begin, m).array();
    c[1] = s_pen * ng.squaredNorm();
    c[2] = s_pen * jets.probe(3).squaredNorm();
    if (adj) {
      const Matrix pbar = Scalar(2 * w.residual) * s_res * pred;
      adj->value() = pbar;
      const Matrix lap_bar = -coeff.transpose() * pbar;  // q x m
      for (int p = 0; p < 3; ++p) adj->probe(p).topRows(q) = lap_bar;
      const Matrix ng_bar = Scalar(2 * w.normal_grad) * s_pen * ng;
      for (int k = 0; k < 3; ++k)
        adj->grad(k) = (ng_bar.array().rowwise() * field.row(k).segment(begin, m).array()).matrix();
      adj->probe(3) = Scalar(2 * w.hessian) * s_pen * jets.probe(3);
    }
    return c;
  };
  return batch;
}

template <typename Scalar>
struct LossEvaluation {
  LossBreakdown breakdown;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

namespace detail {

template <typename Scalar>
LossBreakdown reduce_components(const std::vector<LossComponents<Scalar>>& parts, const LossWeights& weights) {
  LossComponents<double> sum{};
  for (const auto& p : parts)
    for (std::size_t k = 0; k < 4; ++k) sum[k] += static_cast<double>(p[k]);
  return combine(sum, weights);
}

template <typename Scalar>
void check_heads(const MlpParams<Scalar>& params, const ResidualBatch<Scalar>& batch) {
  if (params.output_dim() != batch.heads)
    throw Error(batch.heads > 1 ? ErrorKind::TableauMismatch : ErrorKind::ShapeMismatch,
                "network head count does not match the loss");
  if (params.input_dim() != batch.inputs.rows())
    throw Error(ErrorKind::ShapeMismatch, "network input dimension does not match the loss");
}

}  // namespace detail

/// Components evaluated directly from given output jets (no network).
template <typename Scalar>
LossBreakdown breakdown_from_jets(const ResidualBatch<Scalar>& batch, const BatchJets<Scalar>& jets,
                                  const LossWeights& weights = {}) {
  return detail::reduce_components<Scalar>({batch.terms(jets, 0, nullptr, weights)}, weights);
}

/// Loss breakdown and exact parameter gradient of the weighted total.
template <typename Scalar>
LossEvaluation<Scalar> evaluate_loss(const MlpParams<Scalar>& params, const ResidualBatch<Scalar>& batch,
                                     const LossWeights& weights = {}, const EvalOptions& options = {}) {
  detail::check_heads(params, batch);
  const Eigen::Index chunk = std::max<Eigen::Index>(1, options.chunk);
  std::vector<LossComponents<Scalar>> parts(static_cast<std::size_t>((batch.size() + chunk - 1) / chunk));
  const LossAssembler<Scalar> assembler = [&](const BatchJets<Scalar>& jets, Eigen::Index begin,
                                              BatchJets<Scalar>& adjoint) {
    const auto c = batch.terms(jets, begin, &adjoint, weights);
    parts[static_cast<std::size_t>(begin / chunk)] = c;
    return Scalar(weights.residual) * c[0] + Scalar(weights.normal_grad) * c[1] + Scalar(weights.hessian) * c[2] +
           Scalar(weights.initial) * c[3];
  };
  auto result = loss_param_gradient(params, batch.inputs, batch.probes, assembler, {options.threads, chunk});
  return {detail::reduce_components(parts, weights), std::move(result.gradient)};
}

/// Loss breakdown only.
template <typename Scalar>
LossBreakdown loss_breakdown(const MlpParams<Scalar>& params, const ResidualBatch<Scalar>& batch,
                             const LossWeights& weights = {}, const EvalOptions& options = {}) {
  detail::check_heads(params, batch);
  const Eigen::Index chunk = std::max<Eigen::Index>(1, options.chunk);
  std::vector<LossComponents<Scalar>> parts;
  const LossAssembler<Scalar> assembler = [&](const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>&) {
    parts.push_back(batch.terms(jets, begin, nullptr, weights));
    return Scalar(0);
  };
  loss_value(params, batch.inputs, batch.probes, assembler, {1, chunk});
  const LossBreakdown b = detail::reduce_components(parts, weights);
  if (!std::isfinite(b.total)) throw Error(ErrorKind::NonFiniteLoss, "loss is NaN or infinite");
  return b;
}

/// Scalar assembler of the weighted total, for fd_check.
template <typename Scalar>
LossAssembler<Scalar> total_assembler(const ResidualBatch<Scalar>& batch, const LossWeights& weights = {}) {
  return [&batch, weights](const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>& adjoint) {
    const auto c = batch.terms(jets, begin, &adjoint, weights);
    return Scalar(weights.residual) * c[0] + Scalar(weights.normal_grad) * c[1] + Scalar(weights.hessian) * c[2] +
           Scalar(weights.initial) * c[3];
  };
}

std::vector<Vec3> normals_at(const SurfaceModel& surface, std::span<const Vec3> points);
std::vector<Vec3> normals_at(const SurfaceModel& surface, std::span<const SpaceTimePoint> points);

/// Convenience front ends over the batch builders.
LossBreakdown stationary_loss(const MlpParamsd& params, const SurfaceModel& surface, std::span<const Vec3> points,
                              const Eigen::VectorXd& f, const LossWeights& weights = {});
LossBreakdown continuous_loss(const MlpParamsd& params, const SurfaceModel& surface, const CollocationSet& colloc,
                              const PdeRhs& rhs, const InitialValue& u0, const LossWeights& weights, double horizon);
LossBreakdown discrete_loss(const MlpParamsd& params, const SurfaceModel& surface, std::span<const Vec3> points,
                            const ButcherTableau& tableau, double dt, const PdeRhs& rhs, const InitialValue& u0,
                            const LossWeights& weights, double multiplier = 1.0);

/// Collocation data of a continuous-time loss; `sample` draws a mini-batch
/// that keeps the interior/initial proportion.
struct ContinuousData {
  std::vector<SpaceTimePoint> interior;
  std::vector<Vec3> interior_normals;
  Eigen::VectorXd f;
  std::vector<Vec3> initial;
  std::vector<Vec3> initial_normals;
  Eigen::VectorXd u0;
  double horizon = 1.0;

  ResidualBatch<double> batch() const;
  ContinuousData sample(Rng& rng, Eigen::Index interior_count) const;
};

ContinuousData continuous_data(const SurfaceModel& surface, const CollocationSet& colloc, const PdeRhs& rhs,
                               const InitialValue& u0, double horizon);

/// Collocation data of one discrete-time step.
struct DiscreteData {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  ButcherTableau tableau;
  double dt = 0.0;
  Eigen::MatrixXd f;  // points x q
  Eigen::VectorXd u0;
  double multiplier = 1.0;

  ResidualBatch<double> batch() const;
  DiscreteData sample(Rng& rng, Eigen::Index count) const;
};

/// Forcing at stage times is evaluated at original time multiplier * c_j * dt.
DiscreteData discrete_data(const SurfaceModel& surface, std::span<const Vec3> points, const ButcherTableau& tableau,
                           double dt, const PdeRhs& rhs, const InitialValue& u0, double multiplier = 1.0);

/// First `count` entries of a seeded partial Fisher-Yates shuffle of 0..n-1.
std::vector<Eigen::Index> sample_indices(Rng& rng, Eigen::Index n, Eigen::Index count);

/// Time map t~ = t T~ / T onto a reference horizon T~ in (0, 1).
struct TimeRescaling {
  double horizon = 1.0;    // original T
  double reference = 1.0;  // T~ (equal to horizon when no rescaling applies)

  double multiplier() const { return horizon / reference; }
  double to_original(double t_ref) const { return t_ref * multiplier(); }
  double to_reference(double t) const { return t / multiplier(); }
};

/// Identity for T < 1; throws InvalidReference unless 0 < T~ < 1.
TimeRescaling rescale_time(double horizon, double reference);

}  // namespace surfpinn
