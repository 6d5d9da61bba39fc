#pragma once

// Serialisation helpers shared by table/field export and the CLI.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "edgeheat/geometry.hpp"

namespace edgeheat {

/// Invalid configuration; `what()` starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Shortest round-trip form with 17 significant digits.
std::string format_number(double x);

nlohmann::json geometry_to_json(const EdgeGeometry& geom);
/// Validates and builds a geometry; errors name the field path under `where`.
EdgeGeometry geometry_from_json(const nlohmann::json& j, const std::string& where = "geometry");

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace edgeheat
