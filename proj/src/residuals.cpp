#include "surfpinn/residuals.hpp"

#include <algorithm>
#include <cmath>

namespace surfpinn {

LossBreakdown combine(const LossComponents<double>& c, const LossWeights& w) {
  LossBreakdown b;
  b.pde_residual = c[0];
  b.normal_grad_penalty = c[1];
  b.hessian_penalty = c[2];
  b.initial_misfit = c[3];
  b.weights = w;
  b.total = w.residual * c[0] + w.normal_grad * c[1] + w.hessian * c[2] + w.initial * c[3];
  return b;
}

std::vector<Vec3> normals_at(const SurfaceModel& surface, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(normal(surface, x));
  return out;
}

std::vector<Vec3> normals_at(const SurfaceModel& surface, std::span<const SpaceTimePoint> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(normal(surface, p.x));
  return out;
}

LossBreakdown stationary_loss(const MlpParamsd& params, const SurfaceModel& surface, std::span<const Vec3> points,
                              const Eigen::VectorXd& f, const LossWeights& weights) {
  const auto normals = normals_at(surface, points);
  return loss_breakdown(params, stationary_batch<double>(points, normals, f), weights);
}

ResidualBatch<double> ContinuousData::batch() const {
  return continuous_batch<double>(interior, interior_normals, f, initial, initial_normals, u0, horizon);
}

std::vector<Eigen::Index> sample_indices(Rng& rng, Eigen::Index n, Eigen::Index count) {
  count = std::clamp<Eigen::Index>(count, 0, n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

ContinuousData ContinuousData::sample(Rng& rng, Eigen::Index interior_count) const {
  const auto ni = static_cast<Eigen::Index>(interior.size());
  const auto n0 = static_cast<Eigen::Index>(initial.size());
  interior_count = std::min(interior_count, ni);
  const Eigen::Index initial_count =
      ni == 0 ? n0 : std::clamp<Eigen::Index>((interior_count * n0 + ni - 1) / ni, n0 > 0 ? 1 : 0, n0);
  ContinuousData out;
  out.horizon = horizon;
  const auto ii = sample_indices(rng, ni, interior_count);
  const auto i0 = sample_indices(rng, n0, initial_count);
  out.f.resize(interior_count);
  out.u0.resize(initial_count);
  for (std::size_t k = 0; k < ii.size(); ++k) {
    const auto s = static_cast<std::size_t>(ii[k]);
    out.interior.push_back(interior[s]);
    out.interior_normals.push_back(interior_normals[s]);
    out.f(static_cast<Eigen::Index>(k)) = f(ii[k]);
  }
  for (std::size_t k = 0; k < i0.size(); ++k) {
    const auto s = static_cast<std::size_t>(i0[k]);
    out.initial.push_back(initial[s]);
    out.initial_normals.push_back(initial_normals[s]);
    out.u0(static_cast<Eigen::Index>(k)) = u0(i0[k]);
  }
  return out;
}

ContinuousData continuous_data(const SurfaceModel& surface, const CollocationSet& colloc, const PdeRhs& rhs,
                               const InitialValue& u0, double horizon) {
  ContinuousData d;
  d.horizon = horizon;
  d.interior = colloc.interior;
  d.initial = colloc.initial;
  d.interior_normals = normals_at(surface, std::span<const SpaceTimePoint>(d.interior));
  d.initial_normals = normals_at(surface, std::span<const Vec3>(d.initial));
  d.f.resize(static_cast<Eigen::Index>(d.interior.size()));
  for (std::size_t i = 0; i < d.interior.size(); ++i)
    d.f(static_cast<Eigen::Index>(i)) = rhs(d.interior[i].x, d.interior[i].t);
  d.u0.resize(static_cast<Eigen::Index>(d.initial.size()));
  for (std::size_t i = 0; i < d.initial.size(); ++i) d.u0(static_cast<Eigen::Index>(i)) = u0(d.initial[i]);
  return d;
}

ResidualBatch<double> DiscreteData::batch() const {
  return discrete_batch<double>(points, normals, tableau, dt, f, u0, multiplier);
}

DiscreteData DiscreteData::sample(Rng& rng, Eigen::Index count) const {
  const auto idx = sample_indices(rng, static_cast<Eigen::Index>(points.size()), count);
  DiscreteData out;
  out.tableau = tableau;
  out.dt = dt;
  out.multiplier = multiplier;
  out.f.resize(static_cast<Eigen::Index>(idx.size()), f.cols());
  out.u0.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto s = static_cast<std::size_t>(idx[k]);
    out.points.push_back(points[s]);
    out.normals.push_back(normals[s]);
    out.f.row(static_cast<Eigen::Index>(k)) = f.row(idx[k]);
    out.u0(static_cast<Eigen::Index>(k)) = u0(idx[k]);
  }
  return out;
}

DiscreteData discrete_data(const SurfaceModel& surface, std::span<const Vec3> points, const ButcherTableau& tableau,
                           double dt, const PdeRhs& rhs, const InitialValue& u0, double multiplier) {
  DiscreteData d;
  d.points.assign(points.begin(), points.end());
  d.normals = normals_at(surface, points);
  d.tableau = tableau;
  d.dt = dt;
  d.multiplier = multiplier;
  const auto n = static_cast<Eigen::Index>(points.size());
  d.f.resize(n, tableau.q);
  d.u0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = points[static_cast<std::size_t>(i)];
    d.u0(i) = u0(x);
    for (int j = 0; j < tableau.q; ++j) d.f(i, j) = rhs(x, multiplier * tableau.c(j) * dt);
  }
  return d;
}

LossBreakdown continuous_loss(const MlpParamsd& params, const SurfaceModel& surface, const CollocationSet& colloc,
                              const PdeRhs& rhs, const InitialValue& u0, const LossWeights& weights, double horizon) {
  return loss_breakdown(params, continuous_data(surface, colloc, rhs, u0, horizon).batch(), weights);
}

LossBreakdown discrete_loss(const MlpParamsd& params, const SurfaceModel& surface, std::span<const Vec3> points,
                            const ButcherTableau& tableau, double dt, const PdeRhs& rhs, const InitialValue& u0,
                            const LossWeights& weights, double multiplier) {
  if (params.output_dim() != tableau.q + 1)
    throw Error(ErrorKind::TableauMismatch, "network head count must equal q + 1");
  return loss_breakdown(params, discrete_data(surface, points, tableau, dt, rhs, u0, multiplier).batch(), weights);
}

TimeRescaling rescale_time(double horizon, double reference) {
  if (!(reference > 0.0 && reference < 1.0))
    throw Error(ErrorKind::InvalidReference, "reference horizon must lie in (0, 1)");
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (horizon < 1.0) return {horizon, horizon};
  return {horizon, reference};
}

}  // namespace surfpinn
