#include "surfpinn/network.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "surfpinn/random.hpp"
#include "surfpinn/text_io.hpp"

namespace surfpinn {

void validate_layer_sizes(const std::vector<int>& layer_sizes, bool require_hidden) {
  if (layer_sizes.size() < (require_hidden ? 3u : 2u))
    throw Error(ErrorKind::InvalidShape,
                require_hidden ? "network needs at least one hidden layer" : "network needs input and output sizes");
  for (int s : layer_sizes)
    if (s < 1) throw Error(ErrorKind::InvalidShape, "layer sizes must be positive");
}

MlpParamsd init_params(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  validate_layer_sizes(layer_sizes, true);
  MlpParamsd p = zero_params<double>(layer_sizes);
  p.seed = seed;
  Rng rng(seed);
  for (int l = 0; l < p.layer_count(); ++l) {
    auto& w = p.weights[static_cast<std::size_t>(l)];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    // Row-major fill so the stream order matches the flattening order.
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  }
  return p;
}

std::vector<int> continuous_preset() { return {4, 100, 100, 100, 100, 1}; }

std::vector<int> discrete_preset(int stages) {
  if (stages < 1) throw Error(ErrorKind::InvalidShape, "stage count must be positive");
  return {3, 200, 200, 200, 200, stages + 1};
}

void write_params(std::ostream& out, const MlpParamsd& params) {
  out << "surfpinn-mlp 1\n";
  out << "activation sin_pi\n";
  out << "seed " << params.seed << '\n';
  out << "layers " << params.layer_sizes.size();
  for (int s : params.layer_sizes) out << ' ' << s;
  out << '\n';
  const auto flat = flatten(params);
  write_vector(out, "values", flat);
}

MlpParamsd read_params(std::istream& in) {
  expect_token(in, "surfpinn-mlp");
  if (read_value<int>(in, "format version") != 1) throw Error(ErrorKind::ParseError, "unsupported checkpoint version");
  expect_token(in, "activation");
  if (read_value<std::string>(in, "activation") != "sin_pi")
    throw Error(ErrorKind::ParseError, "unknown activation in checkpoint");
  expect_token(in, "seed");
  const auto seed = read_value<std::uint64_t>(in, "seed");
  expect_token(in, "layers");
  const auto count = read_value<int>(in, "layer count");
  if (count < 2 || count > 64) throw Error(ErrorKind::ParseError, "implausible layer count");
  std::vector<int> sizes(static_cast<std::size_t>(count));
  for (auto& s : sizes) s = read_value<int>(in, "layer size");
  MlpParamsd p = zero_params<double>(sizes);
  p.seed = seed;
  const Eigen::VectorXd flat = read_vector(in, "values");
  unflatten(p, flat);
  return p;
}

}  // namespace surfpinn
