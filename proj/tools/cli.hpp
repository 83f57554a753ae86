#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surfpinn/bench.hpp"
#include "surfpinn/trainer.hpp"

namespace surfpinn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,         // bad flags, config or missing files
  kTrainingAbort = 2, // NonFiniteLoss, NonFiniteUpdate, Diverged
  kCheckFailed = 3,   // verify or fd-check found a violation
};

/// Problem selection plus the overrides a config file may apply to it.
struct ProblemOverrides {
  std::string problem = "sphere-continuous";
  std::string solution;
  std::optional<double> horizon;
  std::optional<double> reference_horizon;
  std::optional<int> stages;
  std::optional<int> n_space;
  std::optional<int> n_time;
  std::optional<int> n_initial;
  std::optional<int> n_eval;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  ProblemOverrides problem;
  TrainingConfig training;
  std::optional<std::vector<int>> layers;  // defaults to the problem preset
  std::uint64_t init_seed = 0;
  std::string out = "run";
  bool resume = false;

  ProblemSpec problem_spec() const;
  std::vector<int> network_layers() const;
};

/// Throws ParseError naming the offending field.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
/// Accepts a plain config or a run manifest (which embeds one under "config").
RunConfig load_config(const std::filesystem::path& path);

/// Parses "4x20" as 4 hidden layers of width 20.
std::vector<int> parse_hidden(const std::string& text, int inputs, int outputs);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace surfpinn::cli
