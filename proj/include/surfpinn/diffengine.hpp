#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "surfpinn/error.hpp"
#include "surfpinn/network.hpp"

namespace surfpinn {

/// Second-order directional probes u^T H v of the network output with respect
/// to its inputs. A direction is either a coordinate axis or a per-point field
/// (d x N); a probe is a pair of direction indices.
template <typename Scalar>
struct ProbeSet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Direction {
    int axis = -1;  // >= 0 selects e_axis, otherwise `field` is used
    Matrix field;
  };

  std::vector<Direction> directions;
  std::vector<std::array<int, 2>> pairs;

  int size() const { return static_cast<int>(pairs.size()); }

  int add_axis(int axis) {
    directions.push_back({axis, Matrix()});
    return static_cast<int>(directions.size()) - 1;
  }
  int add_field(Matrix field) {
    directions.push_back({-1, std::move(field)});
    return static_cast<int>(directions.size()) - 1;
  }
  int add_pair(int first, int second) {
    pairs.push_back({first, second});
    return size() - 1;
  }

  /// All coordinate pairs (k, l) with k <= l, in row-major upper-triangle order.
  static ProbeSet hessian(int input_dim) {
    ProbeSet set;
    for (int k = 0; k < input_dim; ++k) set.add_axis(k);
    for (int k = 0; k < input_dim; ++k)
      for (int l = k; l < input_dim; ++l) set.add_pair(k, l);
    return set;
  }

  /// Restriction of per-point fields to points [begin, begin + count).
  ProbeSet slice(Eigen::Index begin, Eigen::Index count) const {
    ProbeSet out;
    out.pairs = pairs;
    for (const auto& d : directions)
      out.directions.push_back({d.axis, d.axis >= 0 ? Matrix() : Matrix(d.field.middleCols(begin, count))});
    return out;
  }
};

/// Jets of several rows (units or output heads) at N points. Columns hold
/// component-major blocks of N: value, then d gradient blocks, then one block
/// per probe.
template <typename Scalar>
class BatchJets {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BatchJets() = default;
  BatchJets(Eigen::Index rows, Eigen::Index points, int input_dim, int probe_count)
      : data_(Matrix::Zero(rows, points * (1 + input_dim + probe_count))),
        points_(points),
        input_dim_(input_dim),
        probe_count_(probe_count) {}

  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index points() const { return points_; }
  int input_dim() const { return input_dim_; }
  int probe_count() const { return probe_count_; }

  auto value() { return data_.leftCols(points_); }
  auto value() const { return data_.leftCols(points_); }
  auto grad(int k) { return data_.middleCols((1 + k) * points_, points_); }
  auto grad(int k) const { return data_.middleCols((1 + k) * points_, points_); }
  auto probe(int p) { return data_.middleCols((1 + input_dim_ + p) * points_, points_); }
  auto probe(int p) const { return data_.middleCols((1 + input_dim_ + p) * points_, points_); }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }

 private:
  Matrix data_;
  Eigen::Index points_ = 0;
  int input_dim_ = 0;
  int probe_count_ = 0;
};

/// Forward propagation of (value, input gradient, probes) through the network
/// for a batch of points, retaining what the reverse pass over parameters needs.
template <typename Scalar>
class JetTape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  template <typename Derived>
  JetTape(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs, ProbeSet<Scalar> probes)
      : params_(params), probes_(std::move(probes)) {
    const int d = params.input_dim();
    if (inputs.rows() != d) throw Error(ErrorKind::ShapeMismatch, "input dimension does not match the network");
    for (const auto& dir : probes_.directions) {
      if (dir.axis >= d) throw Error(ErrorKind::ShapeMismatch, "probe axis exceeds input dimension");
      if (dir.axis < 0 && (dir.field.rows() != d || dir.field.cols() != inputs.cols()))
        throw Error(ErrorKind::ShapeMismatch, "probe direction field must be d x N");
    }
    const Eigen::Index n = inputs.cols();
    const int probes_n = probes_.size();

    input_ = BatchJets<Scalar>(d, n, d, probes_n);
    input_.value() = inputs;
    for (int k = 0; k < d; ++k) input_.grad(k).row(k).setOnes();

    const int layers = params.layer_count();
    pre_.resize(static_cast<std::size_t>(layers));
    post_.resize(static_cast<std::size_t>(layers - 1));
    d1_.resize(post_.size());
    d2_.resize(post_.size());
    d3_.resize(post_.size());
    directional_.resize(post_.size());

    const BatchJets<Scalar>* below = &input_;
    for (int l = 0; l < layers; ++l) {
      const auto& w = params.weights[static_cast<std::size_t>(l)];
      auto& z = pre_[static_cast<std::size_t>(l)];
      z = BatchJets<Scalar>(w.rows(), n, d, probes_n);
      z.data().noalias() = w * below->data();
      z.value().colwise() += params.biases[static_cast<std::size_t>(l)];
      if (l + 1 == layers) break;
      activate(static_cast<std::size_t>(l));
      below = &post_[static_cast<std::size_t>(l)];
    }
  }

  /// Output-head jets, rows = heads.
  const BatchJets<Scalar>& output() const { return pre_.back(); }

  /// Accumulates d(loss)/d(theta) into `gradient` (flattening order) given
  /// the adjoint of the output jets.
  template <typename Derived>
  void backward(const BatchJets<Scalar>& output_adjoint, Eigen::MatrixBase<Derived>& gradient) const {
    const int layers = params_.layer_count();
    accumulate_layer(layers - 1, output_adjoint, gradient);
    if (layers == 1) return;
    Matrix upper_adjoint = params_.weights.back().transpose() * output_adjoint.data();
    for (int l = layers - 2; l >= 0; --l) {
      const auto ul = static_cast<std::size_t>(l);
      const BatchJets<Scalar> zbar = activation_adjoint(ul, upper_adjoint);
      accumulate_layer(l, zbar, gradient);
      if (l > 0) upper_adjoint.noalias() = params_.weights[ul].transpose() * zbar.data();
    }
  }

 private:
  const BatchJets<Scalar>& below(int l) const {
    return l == 0 ? input_ : post_[static_cast<std::size_t>(l - 1)];
  }

  template <typename Derived>
  void accumulate_layer(int l, const BatchJets<Scalar>& zbar, Eigen::MatrixBase<Derived>& gradient) const {
    const auto& w = params_.weights[static_cast<std::size_t>(l)];
    const Eigen::Index offset = params_.layer_offset(l);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> wbar(
        gradient.derived().data() + offset, w.rows(), w.cols());
    wbar.noalias() += zbar.data() * below(l).data().transpose();
    gradient.segment(offset + w.size(), w.rows()) += zbar.value().rowwise().sum();
  }

  // D_j: first derivative of the pre-activation along probe direction j.
  Matrix directional(std::size_t l, int j) const {
    const auto& dir = probes_.directions[static_cast<std::size_t>(j)];
    const auto& z = pre_[l];
    if (dir.axis >= 0) return z.grad(dir.axis);
    Matrix out = Matrix::Zero(z.rows(), z.points());
    for (int k = 0; k < z.input_dim(); ++k)
      out.array() += z.grad(k).array().rowwise() * dir.field.row(k).array();
    return out;
  }

  void activate(std::size_t l) {
    const auto& z = pre_[l];
    auto& a = post_[l];
    const int d = z.input_dim();
    a = BatchJets<Scalar>(z.rows(), z.points(), d, z.probe_count());
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const Array phase = pi * z.value().array();
    const Array s = phase.sin();
    const Array c = phase.cos();
    d1_[l] = pi * c;
    d2_[l] = -pi * pi * s;
    d3_[l] = -pi * pi * pi * c;
    a.value() = s.matrix();
    for (int k = 0; k < d; ++k) a.grad(k) = (d1_[l] * z.grad(k).array()).matrix();
    auto& dirs = directional_[l];
    dirs.clear();
    for (int j = 0; j < static_cast<int>(probes_.directions.size()); ++j) dirs.push_back(directional(l, j));
    for (int p = 0; p < probes_.size(); ++p) {
      const auto [u, v] = probes_.pairs[static_cast<std::size_t>(p)];
      a.probe(p) = (d2_[l] * dirs[static_cast<std::size_t>(u)].array() * dirs[static_cast<std::size_t>(v)].array() +
                    d1_[l] * z.probe(p).array())
                       .matrix();
    }
  }

  BatchJets<Scalar> activation_adjoint(std::size_t l, const Matrix& abar_data) const {
    const auto& z = pre_[l];
    const int d = z.input_dim();
    const Eigen::Index n = z.points();
    const auto& dirs = directional_[l];
    BatchJets<Scalar> zbar(z.rows(), n, d, z.probe_count());
    auto abar = [&](int block) { return abar_data.middleCols(block * n, n).array(); };

    Array value_bar = abar(0) * d1_[l];
    for (int k = 0; k < d; ++k) value_bar += abar(1 + k) * d2_[l] * z.grad(k).array();
    std::vector<Array> dir_bar(dirs.size(), Array::Zero(z.rows(), n));
    for (int p = 0; p < probes_.size(); ++p) {
      const auto [u, v] = probes_.pairs[static_cast<std::size_t>(p)];
      const auto pbar = abar(1 + d + p);
      const auto du = dirs[static_cast<std::size_t>(u)].array();
      const auto dv = dirs[static_cast<std::size_t>(v)].array();
      value_bar += pbar * (d3_[l] * du * dv + d2_[l] * z.probe(p).array());
      dir_bar[static_cast<std::size_t>(u)] += pbar * d2_[l] * dv;
      dir_bar[static_cast<std::size_t>(v)] += pbar * d2_[l] * du;
      zbar.probe(p) = (pbar * d1_[l]).matrix();
    }
    zbar.value() = value_bar.matrix();
    for (int k = 0; k < d; ++k) zbar.grad(k) = (abar(1 + k) * d1_[l]).matrix();
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      const auto& dir = probes_.directions[j];
      if (dir.axis >= 0) {
        zbar.grad(dir.axis) += dir_bar[j].matrix();
      } else {
        for (int k = 0; k < d; ++k) zbar.grad(k).array() += dir_bar[j].rowwise() * dir.field.row(k).array();
      }
    }
    return zbar;
  }

  const MlpParams<Scalar>& params_;
  ProbeSet<Scalar> probes_;
  BatchJets<Scalar> input_;
  std::vector<BatchJets<Scalar>> pre_;
  std::vector<BatchJets<Scalar>> post_;
  std::vector<Array> d1_, d2_, d3_;
  std::vector<std::vector<Matrix>> directional_;
};

/// Value, input gradient and full input Hessian of one output head at one point.
template <typename Scalar>
struct Jet2 {
  Scalar value{};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hess;
};

/// Exact 2-jet of every head at x (no finite differences).
template <typename Scalar, typename Derived>
std::vector<Jet2<Scalar>> jet2_eval(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& x) {
  const int d = params.input_dim();
  if (x.size() != d) throw Error(ErrorKind::ShapeMismatch, "input dimension does not match the network");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> column = x.derived().reshaped(d, 1);
  const auto probes = ProbeSet<Scalar>::hessian(d);
  JetTape<Scalar> tape(params, column, probes);
  const auto& out = tape.output();
  std::vector<Jet2<Scalar>> jets(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index h = 0; h < out.rows(); ++h) {
    auto& jet = jets[static_cast<std::size_t>(h)];
    jet.value = out.value()(h, 0);
    jet.grad.resize(d);
    jet.hess.resize(d, d);
    for (int k = 0; k < d; ++k) jet.grad(k) = out.grad(k)(h, 0);
    for (int p = 0; p < probes.size(); ++p) {
      const auto [k, l] = probes.pairs[static_cast<std::size_t>(p)];
      jet.hess(k, l) = jet.hess(l, k) = out.probe(p)(h, 0);
    }
  }
  return jets;
}

/// Maps the output jets of points [begin, begin + jets.points()) of a batch to
/// an additive loss contribution and writes d(contribution)/d(jets) into
/// `adjoint` (pre-sized, zeroed). Batch losses are sums of such contributions.
template <typename Scalar>
using LossAssembler =
    std::function<Scalar(const BatchJets<Scalar>& jets, Eigen::Index begin, BatchJets<Scalar>& adjoint)>;

struct EvalOptions {
  int threads = 1;
  Eigen::Index chunk = 1024;
};

template <typename Scalar>
struct LossGradient {
  Scalar loss{};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

/// Loss and exact parameter gradient. The batch is cut into fixed chunks whose
/// contributions are reduced in chunk order, so the result is bit-identical
/// for any thread count.
template <typename Scalar, typename Derived>
LossGradient<Scalar> loss_param_gradient(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs,
                                         const ProbeSet<Scalar>& probes, const LossAssembler<Scalar>& assembler,
                                         const EvalOptions& options = {}) {
  const Eigen::Index n = inputs.cols();
  const Eigen::Index chunk = std::max<Eigen::Index>(1, options.chunk);
  const Eigen::Index chunks = (n + chunk - 1) / chunk;
  std::vector<LossGradient<Scalar>> parts(static_cast<std::size_t>(chunks));

  auto run_chunk = [&](Eigen::Index c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index count = std::min(chunk, n - begin);
    JetTape<Scalar> tape(params, inputs.middleCols(begin, count), probes.slice(begin, count));
    const auto& out = tape.output();
    BatchJets<Scalar> adjoint(out.rows(), out.points(), out.input_dim(), out.probe_count());
    auto& part = parts[static_cast<std::size_t>(c)];
    part.loss = assembler(out, begin, adjoint);
    part.gradient = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(params.parameter_count());
    tape.backward(adjoint, part.gradient);
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(chunks)));
  if (threads == 1) {
    for (Eigen::Index c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<Eigen::Index> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (Eigen::Index c = next++; c < chunks; c = next++) run_chunk(c);
      });
  }

  LossGradient<Scalar> total{Scalar(0), Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(params.parameter_count())};
  for (const auto& part : parts) {
    total.loss += part.loss;
    total.gradient += part.gradient;
  }
  using std::isfinite;
  if (!isfinite(total.loss)) throw Error(ErrorKind::NonFiniteLoss, "loss is NaN or infinite");
  return total;
}

/// Loss only (forward pass), same chunking as loss_param_gradient.
template <typename Scalar, typename Derived>
Scalar loss_value(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs,
                  const ProbeSet<Scalar>& probes, const LossAssembler<Scalar>& assembler,
                  const EvalOptions& options = {}) {
  const Eigen::Index n = inputs.cols();
  const Eigen::Index chunk = std::max<Eigen::Index>(1, options.chunk);
  Scalar loss(0);
  for (Eigen::Index begin = 0; begin < n; begin += chunk) {
    const Eigen::Index count = std::min(chunk, n - begin);
    JetTape<Scalar> tape(params, inputs.middleCols(begin, count), probes.slice(begin, count));
    const auto& out = tape.output();
    BatchJets<Scalar> adjoint(out.rows(), out.points(), out.input_dim(), out.probe_count());
    loss += assembler(out, begin, adjoint);
  }
  return loss;
}

struct FdReport {
  double max_relative_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Central differences over every parameter against loss_param_gradient;
/// relative error uses the denominator max(|analytic|, 1e-8).
template <typename Scalar, typename Derived>
FdReport fd_check(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs,
                  const ProbeSet<Scalar>& probes, const LossAssembler<Scalar>& assembler, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw Error(ErrorKind::InvalidArgument, "fd step must lie in [1e-7, 1e-3]");
  const auto analytic = loss_param_gradient(params, inputs, probes, assembler).gradient;
  const auto base = flatten(params);
  MlpParams<Scalar> perturbed = params;
  FdReport report;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Scalar& entry = parameter_ref(perturbed, i);
    entry = base(i) + Scalar(step);
    const Scalar plus = loss_value(perturbed, inputs, probes, assembler);
    entry = base(i) - Scalar(step);
    const Scalar minus = loss_value(perturbed, inputs, probes, assembler);
    entry = base(i);
    const double numeric = static_cast<double>((plus - minus) / (Scalar(2) * Scalar(step)));
    const double exact = static_cast<double>(analytic(i));
    const double rel = std::abs(numeric - exact) / std::max(std::abs(exact), 1e-8);
    if (rel > report.max_relative_error || report.worst_index < 0) {
      report = {rel, i, exact, numeric};
    }
  }
  return report;
}

}  // namespace surfpinn
