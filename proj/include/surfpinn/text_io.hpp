#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "surfpinn/error.hpp"

namespace surfpinn {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);

void expect_token(std::istream& in, std::string_view token);

template <typename T>
T read_value(std::istream& in, std::string_view what) {
  T value{};
  if (!(in >> value)) throw Error(ErrorKind::ParseError, "expected " + std::string(what));
  return value;
}

/// "<tag> <n>" followed by n lines of shortest-form doubles.
void write_vector(std::ostream& out, std::string_view tag, const Eigen::VectorXd& values);
Eigen::VectorXd read_vector(std::istream& in, std::string_view tag);

}  // namespace surfpinn
