#pragma once

// Declarative runs: a JSON config selects one task (kernel tabulation, the
// verification suite, or a Cahn-Hilliard solve); results are a JSON report
// plus CSV tables in the output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeheat/geometry.hpp"

namespace edgeheat {

// Defaults are the smallest grid on which the truncation wall at s_max stays
// below the verification tolerances.
struct GridConfig {
  int n = 256;
  double s_max = 20.0;
  double L = 0.0;  // edge circumference (b = 1)
  int n_edge = 1;
};

struct RunConfig {
  EdgeGeometry geometry;
  nlohmann::json geometry_block;  // as given (b, fiber)
  GridConfig grid;
  std::string task;               // "kernel" | "verify" | "ch-solve"
  nlohmann::json params;          // task parameters with defaults filled in
  std::string output = "out";
  std::uint64_t seed = 0;
};

/// Validates a config document; throws ConfigError naming the field path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
/// Normalised form: parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const RunConfig& cfg);

struct CheckInfo {
  std::string name;
  std::string description;
  std::string anchor;
};

/// Every check a report can contain, sorted by name.
const std::vector<CheckInfo>& check_catalog();
std::string list_checks_text();

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string anchor;
};

struct RunReport {
  std::string task;
  std::vector<CheckResult> checks;
  nlohmann::json timings = nlohmann::json::object();
  nlohmann::json conventions = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
  bool ok = false;
  std::string error;

  nlohmann::json to_json() const;
};

/// Executes the task and writes report.json (and tables) under `out_dir`.
RunReport execute(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// The `run` command: 0 on success, 1 on numerical failure or failed checks
/// (report still written), 2 on an invalid config.
int run_command(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out_override,
                std::ostream& out, std::ostream& err);

}  // namespace edgeheat
