#include "surfpinn/text_io.hpp"

#include <array>
#include <charconv>

namespace surfpinn {

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size())
    throw Error(ErrorKind::ParseError, "not a number: '" + std::string(text) + "'");
  return value;
}

void expect_token(std::istream& in, std::string_view token) {
  std::string word;
  if (!(in >> word) || word != token)
    throw Error(ErrorKind::ParseError, "expected '" + std::string(token) + "', found '" + word + "'");
}

void write_vector(std::ostream& out, std::string_view tag, const Eigen::VectorXd& values) {
  out << tag << ' ' << values.size() << '\n';
  for (Eigen::Index i = 0; i < values.size(); ++i) out << format_double(values(i)) << '\n';
}

Eigen::VectorXd read_vector(std::istream& in, std::string_view tag) {
  expect_token(in, tag);
  const auto n = read_value<long long>(in, "vector length");
  if (n < 0) throw Error(ErrorKind::ParseError, "negative vector length");
  Eigen::VectorXd values(n);
  std::string word;
  for (long long i = 0; i < n; ++i) {
    if (!(in >> word)) throw Error(ErrorKind::ParseError, "truncated vector '" + std::string(tag) + "'");
    values(i) = parse_double(word);
  }
  return values;
}

}  // namespace surfpinn
