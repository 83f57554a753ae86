#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "surfpinn/error.hpp"

namespace surfpinn {

enum class Activation { SinPi };

/// sigma(s) = sin(pi s) and its first three derivatives.
template <typename Scalar>
struct SinPi {
  static constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  static Scalar value(Scalar s) { using std::sin; return sin(pi * s); }
  static Scalar d1(Scalar s) { using std::cos; return pi * cos(pi * s); }
  static Scalar d2(Scalar s) { using std::sin; return -pi * pi * sin(pi * s); }
  static Scalar d3(Scalar s) { using std::cos; return -pi * pi * pi * cos(pi * s); }
};

/// Fully connected network: hidden layers sin(pi (W a + b)), final layer affine.
/// Flattening order is layer-major; within a layer the weight matrix row-major,
/// then the bias vector.
template <typename Scalar>
struct MlpParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vector> biases;
  Activation activation = Activation::SinPi;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  int hidden_layer_count() const { return layer_count() - 1; }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      n += static_cast<Eigen::Index>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
    return n;
  }

  /// Offset of layer l's first weight in the flat parameter vector.
  Eigen::Index layer_offset(int l) const {
    Eigen::Index n = 0;
    for (int k = 0; k < l; ++k) n += static_cast<Eigen::Index>(layer_sizes[k + 1]) * (layer_sizes[k] + 1);
    return n;
  }

  template <typename Other>
  MlpParams<Other> cast() const {
    MlpParams<Other> out;
    out.layer_sizes = layer_sizes;
    out.activation = activation;
    out.seed = seed;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<Other>());
    return out;
  }
};

using MlpParamsd = MlpParams<double>;

/// Validates consecutive shapes; throws InvalidShape.
void validate_layer_sizes(const std::vector<int>& layer_sizes, bool require_hidden);

template <typename Scalar>
MlpParams<Scalar> zero_params(const std::vector<int>& layer_sizes) {
  validate_layer_sizes(layer_sizes, false);
  MlpParams<Scalar> p;
  p.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    p.weights.push_back(MlpParams<Scalar>::Matrix::Zero(layer_sizes[l + 1], layer_sizes[l]));
    p.biases.push_back(MlpParams<Scalar>::Vector::Zero(layer_sizes[l + 1]));
  }
  return p;
}

/// Glorot-uniform weights, zero biases; bit-reproducible from the seed.
MlpParamsd init_params(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// (4, 100, 100, 100, 100, 1): input (x, y, z, t/T).
std::vector<int> continuous_preset();
/// (3, 200, 200, 200, 200, q + 1): heads u^{n+c_1..c_q}, u^{n+1}.
std::vector<int> discrete_preset(int stages);

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten(const MlpParams<Scalar>& p) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat(p.parameter_count());
  Eigen::Index at = 0;
  for (int l = 0; l < p.layer_count(); ++l) {
    const auto& w = p.weights[static_cast<std::size_t>(l)];
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data() + at, w.rows(),
                                                                                       w.cols()) = w;
    at += w.size();
    const auto& b = p.biases[static_cast<std::size_t>(l)];
    flat.segment(at, b.size()) = b;
    at += b.size();
  }
  return flat;
}

template <typename Scalar, typename Derived>
void unflatten(MlpParams<Scalar>& p, const Eigen::MatrixBase<Derived>& flat) {
  if (flat.size() != p.parameter_count())
    throw Error(ErrorKind::ShapeMismatch, "flat parameter vector has the wrong length");
  Eigen::Index at = 0;
  for (int l = 0; l < p.layer_count(); ++l) {
    auto& w = p.weights[static_cast<std::size_t>(l)];
    w = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.derived().data() + at, w.rows(), w.cols());
    at += w.size();
    auto& b = p.biases[static_cast<std::size_t>(l)];
    b = flat.segment(at, b.size());
    at += b.size();
  }
}

/// Reference to the parameter at position `index` of the flattening order.
template <typename Scalar>
Scalar& parameter_ref(MlpParams<Scalar>& p, Eigen::Index index) {
  for (int l = 0; l < p.layer_count(); ++l) {
    auto& w = p.weights[static_cast<std::size_t>(l)];
    if (index < w.size()) return w(index / w.cols(), index % w.cols());
    index -= w.size();
    auto& b = p.biases[static_cast<std::size_t>(l)];
    if (index < b.size()) return b(index);
    index -= b.size();
  }
  throw Error(ErrorKind::ShapeMismatch, "parameter index out of range");
}

/// Batched evaluation: inputs d x N, returns m x N.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_batch(const MlpParams<Scalar>& p,
                                                                      const Eigen::MatrixBase<Derived>& inputs) {
  if (inputs.rows() != p.input_dim())
    throw Error(ErrorKind::ShapeMismatch, "input dimension does not match the network");
  using Matrix = typename MlpParams<Scalar>::Matrix;
  Matrix a = inputs;
  for (int l = 0; l < p.layer_count(); ++l) {
    Matrix z = p.weights[static_cast<std::size_t>(l)] * a;
    z.colwise() += p.biases[static_cast<std::size_t>(l)];
    if (l + 1 < p.layer_count())
      a = z.unaryExpr([](Scalar s) { return SinPi<Scalar>::value(s); });
    else
      a = std::move(z);
  }
  return a;
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const MlpParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  return forward_batch(p, x);
}

/// Plain-text parameter block; doubles use shortest round-trip decimal form.
void write_params(std::ostream& out, const MlpParamsd& params);
MlpParamsd read_params(std::istream& in);

}  // namespace surfpinn
