#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace weakkam {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;   ///< computation or configuration error
inline constexpr int kExitBreach = 3;  ///< a tolerance was not met

/// Everything a run depends on. A run is reproducible from its config and the
/// code version; every command writes it to <out>/run_config.json.
struct RunConfig {
  std::string command;
  std::string model = "pendulum";
  std::vector<double> c;
  std::vector<double> h;
  std::optional<int> grid;
  std::filesystem::path out = "out";
  int workers = 0;  ///< 0: machine parallelism
  std::uint64_t seed = 2024;
  std::vector<std::string> routes;
  double tolerance = 5e-3;
  /// Points for potentials and barriers, start point for orbits.
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> v;
  std::optional<double> k;
  std::optional<double> alpha;
  double tau = 1.0;
  double t_end = 10.0;
  double dt = 1e-3;
  bool list = false;
  std::vector<int> criteria;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

/// "a,b,c" or "lo:hi:n" (n evenly spaced values, n >= 0). Throws BadInput.
std::vector<double> parse_values(std::string_view text);

/// A path as given, else <name>.json in the bundled models directory.
std::filesystem::path resolve_model_path(const std::string& name);

/// Column order of every CSV the commands write.
std::string csv_columns_help();

const std::vector<std::string>& command_names();

/// Dispatches on cfg.command. Library errors become kExitError with the
/// message on log; results go to files under cfg.out and a JSON summary on out.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& log);

}  // namespace weakkam
