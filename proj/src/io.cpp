#include "edgeheat/io.hpp"

#include <cstdio>
#include <fstream>

namespace edgeheat {

using nlohmann::json;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json geometry_to_json(const EdgeGeometry& geom) {
  const auto& fiber = geom.fiber;
  return json{{"b", geom.b},
              {"fiber",
               {{"kind", fiber.kind == FiberKind::Circle ? "circle" : "sphere"},
                {"f", fiber.fiber_dim},
                {"max_mode", fiber.max_mode},
                {"cone_scale", fiber.cone_scale}}},
              {"s_max", geom.s_max}};
}

namespace {

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "." + key, "missing required field");
  return *it;
}

int require_int(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key, "expected an integer");
  return v.get<int>();
}

double require_number(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number()) throw ConfigError(where + "." + key, "expected a number");
  return v.get<double>();
}

}  // namespace

EdgeGeometry geometry_from_json(const json& j, const std::string& where) {
  const int b = require_int(j, "b", where);
  if (b < 0) throw ConfigError(where + ".b", "must be >= 0");
  const json& fj = require(j, "fiber", where);
  const std::string fw = where + ".fiber";
  const json& kind = require(fj, "kind", fw);
  if (!kind.is_string()) throw ConfigError(fw + ".kind", "expected \"circle\" or \"sphere\"");
  const int f = require_int(fj, "f", fw);
  const int max_mode = require_int(fj, "max_mode", fw);
  const double c = require_number(fj, "cone_scale", fw);
  if (max_mode < 0) throw ConfigError(fw + ".max_mode", "must be >= 0");
  if (!(c > 0.0)) throw ConfigError(fw + ".cone_scale", "must be positive");
  const double s_max = require_number(j, "s_max", where);
  if (!(s_max > 0.0)) throw ConfigError(where + ".s_max", "must be positive");

  FiberSpectrum spec;
  if (kind == "circle") {
    if (f != 1) throw ConfigError(fw + ".f", "a circle fiber has f = 1");
    spec = circle_fiber(max_mode, c);
  } else if (kind == "sphere") {
    if (f < 2) throw ConfigError(fw + ".f", "a sphere fiber needs f >= 2");
    spec = sphere_fiber(f, max_mode, c);
  } else {
    throw ConfigError(fw + ".kind", "expected \"circle\" or \"sphere\"");
  }
  return make_geometry(b, std::move(spec), s_max);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace edgeheat
