#include "edgeheat/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "edgeheat/cahn_hilliard.hpp"
#include "edgeheat/hankel.hpp"
#include "edgeheat/io.hpp"
#include "edgeheat/kernel.hpp"
#include "edgeheat/oracle.hpp"
#include "edgeheat/semigroup.hpp"

namespace edgeheat {

using nlohmann::json;

// --- config --------------------------------------------------------------

namespace {

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "." + key, "missing required field");
  return *it;
}

double number_or(const json& j, const std::string& key, const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + "." + key, "expected a number");
  return j[key].get<double>();
}

int int_or(const json& j, const std::string& key, const std::string& where, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(where + "." + key, "expected an integer");
  return j[key].get<int>();
}

double positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

std::vector<double> number_list(const json& j, const std::string& key, const std::string& where,
                                std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j[key];
  const std::string path = where + "." + key;
  if (v.is_number()) return {positive(v.get<double>(), path)};
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a number or a non-empty list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(positive(v[i].get<double>(), path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json kernel_params(const json& p) {
  const std::string w = "params";
  json out;
  out["t"] = number_list(p, "t", w, {0.1});
  const std::string path = p.value("path", std::string("quadrature"));
  if (path != "quadrature" && path != "spectral") throw ConfigError(w + ".path", "expected \"quadrature\" or \"spectral\"");
  out["path"] = path;
  out["r"] = number_or(p, "r", w, 0.0);
  if (out["r"].get<double>() < 0.0) throw ConfigError(w + ".r", "must be >= 0");
  return out;
}

json verify_params(const json& p) {
  const std::string w = "params";
  json out;
  out["t"] = positive(number_or(p, "t", w, 0.1), w + ".t");
  json pairs = json::array();
  if (p.contains("semigroup_pairs")) {
    const json& sp = p["semigroup_pairs"];
    if (!sp.is_array() || sp.empty()) throw ConfigError(w + ".semigroup_pairs", "expected a list of [t1, t2] pairs");
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const std::string path = w + ".semigroup_pairs[" + std::to_string(i) + "]";
      if (!sp[i].is_array() || sp[i].size() != 2 || !sp[i][0].is_number() || !sp[i][1].is_number()) {
        throw ConfigError(path, "expected [t1, t2]");
      }
      pairs.push_back({positive(sp[i][0].get<double>(), path), positive(sp[i][1].get<double>(), path)});
    }
  } else {
    pairs = json::array({json::array({0.1, 0.1}), json::array({0.05, 0.2})});
  }
  out["semigroup_pairs"] = pairs;
  out["completeness_times"] = number_list(p, "completeness_times", w, {0.05, 0.2});
  out["completeness_points"] = int_or(p, "completeness_points", w, 10);
  out["random_vectors"] = int_or(p, "random_vectors", w, 20);
  out["oracle_cells"] = int_or(p, "oracle_cells", w, 512);
  if (out["completeness_points"].get<int>() < 1) throw ConfigError(w + ".completeness_points", "must be >= 1");
  if (out["random_vectors"].get<int>() < 1) throw ConfigError(w + ".random_vectors", "must be >= 1");
  if (out["oracle_cells"].get<int>() < 64) throw ConfigError(w + ".oracle_cells", "must be >= 64");

  const json defaults = {{"hankel-isometry", 1e-8},   {"kernel-symmetry", 1e-12},     {"kernel-two-path", 1e-6},
                         {"semigroup", 1e-5},         {"homogeneity", 1e-8},          {"homogeneity-order", 1e-3},
                         {"stochastic-completeness", 1e-5}, {"exponent-fit", 0.02}, {"oracle-kernel-match", 1e-3}};
  json tol = defaults;
  if (p.contains("tolerances")) {
    const json& t = p["tolerances"];
    if (!t.is_object()) throw ConfigError(w + ".tolerances", "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      const std::string path = w + ".tolerances." + it.key();
      if (!defaults.contains(it.key())) throw ConfigError(path, "unknown check");
      if (!it->is_number()) throw ConfigError(path, "expected a number");
      tol[it.key()] = positive(it->get<double>(), path);
    }
  }
  out["tolerances"] = tol;
  return out;
}

json ch_params(const json& p, const EdgeGeometry& geom) {
  const std::string w = "params";
  json out;
  const json solver = p.contains("solver") ? p["solver"] : json::object();
  const std::string sw = w + ".solver";
  if (!solver.is_object()) throw ConfigError(sw, "expected an object");
  SolverConfig d;
  json s;
  s["T"] = positive(number_or(solver, "T", sw, d.T), sw + ".T");
  s["n_time"] = int_or(solver, "n_time", sw, d.n_time);
  s["picard_tol"] = positive(number_or(solver, "picard_tol", sw, d.picard_tol), sw + ".picard_tol");
  s["picard_max"] = int_or(solver, "picard_max", sw, d.picard_max);
  s["contraction_threshold"] = number_or(solver, "contraction_threshold", sw, d.contraction_threshold);
  s["halving_max"] = int_or(solver, "halving_max", sw, d.halving_max);
  const std::string nl = solver.value("nonlinearity", std::string("cahn-hilliard"));
  if (nl != "cahn-hilliard" && nl != "linear" && nl != "none") {
    throw ConfigError(sw + ".nonlinearity", "expected \"cahn-hilliard\", \"linear\" or \"none\"");
  }
  s["nonlinearity"] = nl;
  if (s["n_time"].get<int>() < 1) throw ConfigError(sw + ".n_time", "must be >= 1");
  if (s["picard_max"].get<int>() < 1) throw ConfigError(sw + ".picard_max", "must be >= 1");
  if (s["halving_max"].get<int>() < 0) throw ConfigError(sw + ".halving_max", "must be >= 0");
  const double ct = s["contraction_threshold"].get<double>();
  if (!(ct > 0.0 && ct < 1.0)) throw ConfigError(sw + ".contraction_threshold", "must lie in (0, 1)");
  out["solver"] = s;
  if (p.contains("T_total")) out["T_total"] = positive(number_or(p, "T_total", w, 0.0), w + ".T_total");

  const json& u0 = field(p, "u0", w);
  if (!u0.is_array() || u0.empty()) throw ConfigError(w + ".u0", "expected a non-empty list of terms");
  json terms = json::array();
  for (std::size_t i = 0; i < u0.size(); ++i) {
    const std::string tw = w + ".u0[" + std::to_string(i) + "]";
    const json& term = u0[i];
    const json& type = field(term, "type", tw);
    if (type == "constant") {
      terms.push_back({{"type", "constant"}, {"value", number_or(term, "value", tw, 0.0)}});
    } else if (type == "bump") {
      json b;
      b["type"] = "bump";
      b["amplitude"] = number_or(term, "amplitude", tw, 1.0);
      b["center"] = number_or(term, "center", tw, 1.0);
      b["width"] = positive(number_or(term, "width", tw, 1.0), tw + ".width");
      b["mode"] = int_or(term, "mode", tw, 0);
      b["copy"] = int_or(term, "copy", tw, 0);
      b["power"] = number_or(term, "power", tw, 0.0);
      const int mode = b["mode"].get<int>();
      if (mode < 0 || mode >= int(geom.fiber.entries.size())) throw ConfigError(tw + ".mode", "no such fiber mode");
      const int copy = b["copy"].get<int>();
      if (copy < 0 || copy >= geom.fiber.entries[mode].multiplicity) throw ConfigError(tw + ".copy", "no such copy");
      if (b["power"].get<double>() < 0.0) throw ConfigError(tw + ".power", "must be >= 0");
      terms.push_back(b);
    } else {
      throw ConfigError(tw + ".type", "expected \"constant\" or \"bump\"");
    }
  }
  out["u0"] = terms;
  return out;
}

SolverConfig solver_from_json(const json& s) {
  SolverConfig cfg;
  cfg.T = s["T"];
  cfg.n_time = s["n_time"];
  cfg.picard_tol = s["picard_tol"];
  cfg.picard_max = s["picard_max"];
  cfg.contraction_threshold = s["contraction_threshold"];
  cfg.halving_max = s["halving_max"];
  const std::string nl = s["nonlinearity"];
  cfg.nonlinearity = nl == "linear" ? Nonlinearity::Linear : nl == "none" ? Nonlinearity::None : Nonlinearity::CahnHilliard;
  return cfg;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  RunConfig cfg;
  const json grid = doc.contains("grid") ? doc["grid"] : json::object();
  if (!grid.is_object()) throw ConfigError("grid", "expected an object");
  cfg.grid.n = int_or(grid, "n", "grid", cfg.grid.n);
  if (cfg.grid.n < 16) throw ConfigError("grid.n", "must be >= 16");

  json geom = field(doc, "geometry", "config");
  if (!geom.is_object()) throw ConfigError("geometry", "expected an object");
  // The radial extent may sit in either block; both must agree.
  if (grid.contains("s_max")) cfg.grid.s_max = positive(number_or(grid, "s_max", "grid", 0.0), "grid.s_max");
  if (geom.contains("s_max")) {
    const double g = positive(number_or(geom, "s_max", "geometry", 0.0), "geometry.s_max");
    if (grid.contains("s_max") && g != cfg.grid.s_max) throw ConfigError("geometry.s_max", "conflicts with grid.s_max");
    cfg.grid.s_max = g;
    geom.erase("s_max");
  }
  cfg.geometry_block = geom;
  geom["s_max"] = cfg.grid.s_max;
  cfg.geometry = geometry_from_json(geom, "geometry");

  if (cfg.geometry.b >= 1) {
    cfg.grid.L = positive(number_or(grid, "L", "grid", 0.0), "grid.L");
    cfg.grid.n_edge = int_or(grid, "n_edge", "grid", 16);
    if (cfg.grid.n_edge < 2) throw ConfigError("grid.n_edge", "must be >= 2");
  }

  const json& task = field(doc, "task", "config");
  if (!task.is_string()) throw ConfigError("task", "expected \"kernel\", \"verify\" or \"ch-solve\"");
  cfg.task = task.get<std::string>();
  const json params = doc.contains("params") ? doc["params"] : json::object();
  if (!params.is_object()) throw ConfigError("params", "expected an object");
  if (cfg.task == "kernel") {
    cfg.params = kernel_params(params);
  } else if (cfg.task == "verify") {
    cfg.params = verify_params(params);
  } else if (cfg.task == "ch-solve") {
    if (cfg.geometry.b > 1) throw ConfigError("geometry.b", "ch-solve supports b = 0 or b = 1");
    if (!cfg.geometry.fiber.has_eigenfunctions()) {
      throw ConfigError("geometry.fiber", "ch-solve needs a circle or a 2-sphere fiber");
    }
    cfg.params = ch_params(params, cfg.geometry);
  } else {
    throw ConfigError("task", "expected \"kernel\", \"verify\" or \"ch-solve\"");
  }

  if (doc.contains("output")) {
    if (!doc["output"].is_string()) throw ConfigError("output", "expected a directory path");
    cfg.output = doc["output"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& cfg) {
  json grid = {{"n", cfg.grid.n}, {"s_max", cfg.grid.s_max}};
  if (cfg.geometry.b >= 1) {
    grid["L"] = cfg.grid.L;
    grid["n_edge"] = cfg.grid.n_edge;
  }
  return {{"geometry", cfg.geometry_block}, {"grid", grid},          {"task", cfg.task},
          {"params", cfg.params},           {"output", cfg.output}, {"seed", cfg.seed}};
}

// --- check catalogue -----------------------------------------------------

const std::vector<CheckInfo>& check_catalog() {
  static const std::vector<CheckInfo> catalog = [] {
    std::vector<CheckInfo> c = {
        {"energy-monotone", "Cahn-Hilliard energy never increases by more than 1e-8 between time nodes",
         "Lyapunov functional of the Cahn-Hilliard flow"},
        {"exponent-fit", "fitted tip exponent of every mode kernel equals nu + 1/2, with no log term for nu > 0",
         "indicial roots and the Friedrichs condition c^- = 0"},
        {"hankel-isometry", "random vectors keep their norm and the transform squares to the identity",
         "Hankel transform as a self-adjoint isometry of L^2(R+)"},
        {"homogeneity", "k(l^4 t, l s, l s~) = l^{-1-b} k(t, s, s~) for the rescaled mode kernels",
         "model heat kernel homogeneous of order -(1+b+f)"},
        {"homogeneity-order", "fitted scaling order of the geometric kernel equals -(1+b+f)",
         "model heat kernel homogeneous of order -(1+b+f)"},
        {"kernel-symmetry", "k(t, s, s~) = k(t, s~, s) at random points", "self-adjointness of the bi-Laplacian"},
        {"kernel-two-path", "quadrature and transform-multiplier kernel tables agree on interior nodes",
         "diagonalisation by the Hankel-Fourier transform"},
        {"mass-drift", "relative change of the total mass along the trajectory", "e^{-t Delta^2} 1 = 1"},
        {"oracle-kernel-match", "finite-volume eigendecomposition kernel matches the quadrature kernel",
         "Friedrichs radial operator l_nu"},
        {"picard-converged", "Picard iteration of the Duhamel map converged on the accepted interval",
         "short-time existence by contraction of the Duhamel map"},
        {"semigroup", "K(t1) W K(t2) = K(t1 + t2) on interior nodes", "semigroup law of e^{-t Delta^2}"},
        {"stochastic-completeness", "the geometric kernel integrates to one against the volume form",
         "stochastic completeness: e^{-t Delta^2} 1 = 1"},
        {"tip-exponents", "leading tip exponent of each mode of u(T) lies in the index set",
         "asymptotics of the Cahn-Hilliard solution at the tip"},
    };
    std::sort(c.begin(), c.end(), [](const CheckInfo& a, const CheckInfo& b) { return a.name < b.name; });
    return c;
  }();
  return catalog;
}

std::string list_checks_text() {
  std::ostringstream out;
  for (const CheckInfo& c : check_catalog()) {
    out << c.name << "\t" << c.description << "\t[" << c.anchor << "]\n";
  }
  return out.str();
}

json RunReport::to_json() const {
  json checks_json = json::array();
  for (const CheckResult& c : checks) {
    checks_json.push_back(
        {{"name", c.name}, {"value", c.value}, {"tol", c.tol}, {"pass", c.pass}, {"anchor", c.anchor}});
  }
  json j = {{"task", task},           {"checks", checks_json}, {"timings", timings},
            {"conventions", conventions}, {"details", details}, {"pass", ok}};
  if (!error.empty()) j["error"] = error;
  return j;
}

// --- tasks ---------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::string anchor_of(const std::string& name) {
  for (const CheckInfo& c : check_catalog()) {
    if (c.name == name) return c.anchor;
  }
  throw std::logic_error("check '" + name + "' missing from the catalogue");
}

void add_check(RunReport& r, const std::string& name, double value, double tol) {
  r.checks.push_back({name, value, tol, std::isfinite(value) && value <= tol, anchor_of(name)});
}

template <typename F>
void timed(RunReport& r, const std::string& name, F&& fn) {
  const auto start = Clock::now();
  fn();
  r.timings[name] = std::chrono::duration<double>(Clock::now() - start).count();
}

std::string time_label(double t) {
  std::ostringstream s;
  s << t;
  return s.str();
}

double tol_of(const json& params, const std::string& name) { return params["tolerances"][name].get<double>(); }

std::vector<double> mode_orders(const EdgeGeometry& geom) {
  std::vector<double> nus;
  for (const FiberMode& m : geom.fiber.entries) nus.push_back(nu_of_sigma(m.sigma_sq, geom.fiber_dim()));
  return nus;
}

// Rescaled mode kernel of the geometry (cone kernel or edge kernel at r).
double mode_kernel(const EdgeGeometry& geom, double nu, double t, double s, double st, double r) {
  return geom.b == 0 ? cone_mode_kernel(nu, t, s, st) : edge_mode_kernel(nu, geom.b, t, s, st, r);
}

void run_verify(const RunConfig& cfg, const std::filesystem::path& out, RunReport& report) {
  const json& p = cfg.params;
  const EdgeGeometry& geom = cfg.geometry;
  const int n = cfg.grid.n;
  const int b = geom.b;
  const int f = geom.fiber_dim();
  const std::vector<double> nus = mode_orders(geom);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  timed(report, "hankel-isometry", [&] {
    double worst = 0.0;
    for (double nu : nus) {
      const HankelPlan plan = build_plan(nu, n, geom.s_max);
      for (int k = 0; k < p["random_vectors"].get<int>(); ++k) {
        Eigen::VectorXd u(n);
        for (int i = 0; i < n; ++i) u[i] = gauss(rng);
        const Eigen::VectorXd U = forward(plan, u);
        const double n0 = physical_norm(plan, u);
        worst = std::max(worst, std::abs(spectral_norm(plan, U) - n0) / n0);
        worst = std::max(worst, physical_norm(plan, inverse(plan, U) - u) / n0);
      }
    }
    add_check(report, "hankel-isometry", worst, tol_of(p, "hankel-isometry"));
  });

  timed(report, "kernel-symmetry", [&] {
    double worst = 0.0;
    for (double nu : nus) {
      for (int k = 0; k < 5; ++k) {
        const double t = 0.05 + 0.95 * unit(rng), s = 0.1 + 2.9 * unit(rng), st = 0.1 + 2.9 * unit(rng);
        const double a = mode_kernel(geom, nu, t, s, st, 0.0), c = mode_kernel(geom, nu, t, st, s, 0.0);
        worst = std::max(worst, std::abs(a - c) / std::max(std::abs(a), 1e-300));
      }
    }
    add_check(report, "kernel-symmetry", worst, tol_of(p, "kernel-symmetry"));
  });

  const double t = p["t"];
  KernelTable table;
  timed(report, "kernel-two-path", [&] {
    table = assemble_table(geom, t, n, KernelPath::Quadrature);
    const KernelTable spectral = assemble_table(geom, t, n, KernelPath::Spectral);
    add_check(report, "kernel-two-path", table_difference(table, spectral), tol_of(p, "kernel-two-path"));
  });
  export_table(table, out / "tables", "kernel_t" + time_label(t));

  timed(report, "semigroup", [&] {
    double worst = 0.0;
    for (const json& pair : p["semigroup_pairs"]) {
      const double t1 = pair[0], t2 = pair[1];
      worst = std::max(worst, b == 0 ? check_semigroup(assemble_table(geom, t1, n), assemble_table(geom, t2, n),
                                                       assemble_table(geom, t1 + t2, n))
                                     : check_edge_semigroup(geom, t1, t2, n));
    }
    add_check(report, "semigroup", worst, tol_of(p, "semigroup"));
  });

  timed(report, "homogeneity", [&] {
    double worst = 0.0;
    for (double nu : nus) {
      for (int k = 0; k < 5; ++k) {
        const double t0 = 0.05 + 0.45 * unit(rng), s = 0.1 + 0.9 * unit(rng), st = 0.1 + 0.9 * unit(rng);
        const double r = b == 0 ? 0.0 : 0.5 * unit(rng);
        const double base = mode_kernel(geom, nu, t0, s, st, r);
        for (double lam : {2.0, 3.0}) {
          const double scaled = mode_kernel(geom, nu, std::pow(lam, 4) * t0, lam * s, lam * st, lam * r);
          worst = std::max(worst, std::abs(scaled * std::pow(lam, 1.0 + b) - base) / std::abs(base));
        }
      }
    }
    add_check(report, "homogeneity", worst, tol_of(p, "homogeneity"));
  });

  timed(report, "homogeneity-order", [&] {
    // log-log slope of the geometric kernel along (l^4 t, l p, l p~).
    const std::vector<double> lams = {1.0, 1.5, 2.0, 2.5, 3.0};
    Eigen::MatrixXd a(lams.size(), 2);
    Eigen::VectorXd y(lams.size());
    const double nu0 = nus.front();
    const double phi0_sq = 1.0 / geom.fiber.volume();
    for (std::size_t i = 0; i < lams.size(); ++i) {
      const double lam = lams[i];
      const double s = 0.7 * lam, st = 0.9 * lam;
      double h = 0.0;
      if (b == 0 && geom.fiber.has_eigenfunctions()) {
        std::vector<double> z(f, 0.3), zt(f, 0.3);
        h = geometric_cone_kernel(geom, std::pow(lam, 4) * 0.1, s, z, st, zt);
      } else {
        // Constant-mode part of the geometric kernel.
        h = phi0_sq * std::pow(s * st, -0.5 * f) * mode_kernel(geom, nu0, std::pow(lam, 4) * 0.1, s, st, 0.0);
      }
      a(Eigen::Index(i), 0) = std::log(lam);
      a(Eigen::Index(i), 1) = 1.0;
      y[Eigen::Index(i)] = std::log(std::abs(h));
    }
    const double order = a.colPivHouseholderQr().solve(y)[0];
    report.details["homogeneity_order"] = order;
    add_check(report, "homogeneity-order", std::abs(order + (1.0 + b + f)), tol_of(p, "homogeneity-order"));
  });

  timed(report, "stochastic-completeness", [&] {
    double worst = 0.0;
    json rows = json::array();
    for (double tc : p["completeness_times"]) {
      const CompletenessReport c = check_stochastic_completeness(geom, tc, p["completeness_points"].get<int>());
      worst = std::max(worst, c.residual);
      rows.push_back({{"t", tc}, {"residual", c.residual}, {"tail_bound", c.tail_bound}});
    }
    report.details["stochastic_completeness"] = rows;
    add_check(report, "stochastic-completeness", worst, tol_of(p, "stochastic-completeness"));
  });

  timed(report, "exponent-fit", [&] {
    double worst = 0.0;
    json rows = json::array();
    Eigen::VectorXd s(7), v(7);
    for (double nu : nus) {
      for (int i = 0; i < 7; ++i) {
        s[i] = std::pow(2.0, -3 - i);
        v[i] = mode_kernel(geom, nu, t, s[i], 1.0, 0.0);
      }
      const ExponentFit fit = fit_leading_exponent(s, v);
      double dev = std::abs(fit.gamma - (nu + 0.5));
      if (nu > 0.0 && fit.log_flag) dev = std::numeric_limits<double>::infinity();
      worst = std::max(worst, dev);
      rows.push_back({{"nu", nu}, {"gamma", fit.gamma}, {"log_flag", fit.log_flag}});
    }
    report.details["exponent_fit"] = rows;
    add_check(report, "exponent-fit", worst, tol_of(p, "exponent-fit"));
  });

  timed(report, "oracle-kernel-match", [&] {
    double worst = 0.0;
    const int cells = p["oracle_cells"];
    for (std::size_t e = 0; e < std::min<std::size_t>(2, nus.size()); ++e) {
      const FDOperator op = build_fd(nus[e], cells, geom.s_max);
      const Eigen::MatrixXd k = fd_biharmonic_kernel(op, t);
      double err = 0.0, scale = 0.0;
      for (int i = cells / 4; i < 3 * cells / 4; i += 4) {
        for (int j = cells / 4; j < 3 * cells / 4; j += 4) {
          const double ref = cone_mode_kernel(nus[e], t, op.nodes[i], op.nodes[j]);
          err = std::max(err, std::abs(k(i, j) - ref));
          scale = std::max(scale, std::abs(ref));
        }
      }
      worst = std::max(worst, err / scale);
    }
    add_check(report, "oracle-kernel-match", worst, tol_of(p, "oracle-kernel-match"));
  });
}

void run_kernel(const RunConfig& cfg, const std::filesystem::path& out, RunReport& report) {
  const json& p = cfg.params;
  const KernelPath path = p["path"] == "spectral" ? KernelPath::Spectral : KernelPath::Quadrature;
  json files = json::array();
  for (double t : p["t"]) {
    timed(report, "t=" + time_label(t), [&] {
      const KernelTable table = assemble_table(cfg.geometry, t, cfg.grid.n, path, p["r"].get<double>());
      files.push_back(export_table(table, out / "tables", "kernel_t" + time_label(t)).filename().string());
    });
  }
  report.details["manifests"] = files;
}

EdgeField build_u0(const RunConfig& cfg, const DiscretizationPtr& disc) {
  EdgeField u = zero_field(disc, Convention::Geometric);
  const double root_vol = std::sqrt(cfg.geometry.fiber.volume());
  for (const json& term : cfg.params["u0"]) {
    if (term["type"] == "constant") {
      u.far_field += term["value"].get<double>();
      continue;
    }
    const double amp = term["amplitude"], center = term["center"], width = term["width"], power = term["power"];
    const int mode = term["mode"], copy = term["copy"];
    std::size_t component = 0;
    for (std::size_t c = 0; c < disc->component_count(); ++c) {
      if (disc->component(c).entry == mode && disc->component(c).copy == copy) component = c;
    }
    const double edge_center = 0.5 * cfg.grid.L;
    u = u + mode_field(
                disc, component,
                [&](double s, double y) {
                  double g = amp * root_vol * std::pow(s / center, power) *
                             std::exp(-(s - center) * (s - center) / (width * width));
                  // Along an edge the bump is also localised in y, well inside one period.
                  if (cfg.geometry.b == 1) g *= std::exp(-std::pow((y - edge_center) / (0.1 * cfg.grid.L), 2));
                  return g;
                },
                Convention::Geometric);
  }
  return u;
}

void run_ch(const RunConfig& cfg, const std::filesystem::path& out, RunReport& report) {
  const json& p = cfg.params;
  const DiscretizationPtr disc = make_discretization(cfg.geometry, cfg.grid.n, cfg.grid.L, cfg.grid.n_edge);
  const EdgeField u0 = build_u0(cfg, disc);
  const SolverConfig solver = solver_from_json(p["solver"]);
  Trajectory traj;
  timed(report, "solve", [&] { traj = p.contains("T_total") ? march(u0, p["T_total"], solver) : picard_solve(u0, solver); });
  report.details["converged"] = traj.converged;
  report.details["message"] = traj.message;
  report.details["T"] = traj.T;
  report.details["iterations"] = traj.iterations;
  report.details["halvings"] = traj.halvings;
  report.details["contraction"] = traj.contraction;
  add_check(report, "picard-converged", traj.converged ? traj.max_contraction() : 1.0, solver.contraction_threshold);
  if (!traj.converged) {
    report.checks.back().pass = false;
    return;
  }
  Diagnostics diag;
  timed(report, "diagnostics", [&] { diag = diagnostics(traj); });
  add_check(report, "mass-drift", diag.mass_drift, 1e-6);
  add_check(report, "energy-monotone", diag.max_energy_increase, 1e-8);
  double worst = 0.0;
  for (const TipFit& t : diag.tip_fits) {
    worst = std::max(worst, t.fitted ? std::abs(t.gamma - t.expected) : std::numeric_limits<double>::infinity());
  }
  if (!diag.tip_fits.empty()) add_check(report, "tip-exponents", worst, 0.05);
  write_trajectory(traj, diag, out / "trajectory", "u");
}

}  // namespace

RunReport execute(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  RunReport report;
  report.task = cfg.task;
  report.conventions = {{"kernel_convention", "phi-rescaled"},
                        {"field_storage", "phi-rescaled"},
                        {"homogeneity_order", -(1.0 + cfg.geometry.b + cfg.geometry.fiber_dim())},
                        {"laplacian_sign", "non-negative (Friedrichs)"}};
  std::filesystem::create_directories(out_dir);
  const auto start = Clock::now();
  try {
    if (cfg.task == "verify") {
      run_verify(cfg, out_dir, report);
    } else if (cfg.task == "kernel") {
      run_kernel(cfg, out_dir, report);
    } else {
      run_ch(cfg, out_dir, report);
    }
    report.ok = std::all_of(report.checks.begin(), report.checks.end(), [](const CheckResult& c) { return c.pass; });
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  report.timings["total"] = std::chrono::duration<double>(Clock::now() - start).count();
  write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
  return report;
}

int run_command(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out_override,
                std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "invalid config: " << e.what() << "\n";
    return 2;
  }
  const std::filesystem::path dir = out_override ? *out_override : std::filesystem::path(cfg.output);
  const RunReport report = execute(cfg, dir);
  for (const CheckResult& c : report.checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << format_number(c.value) << " tol=" << c.tol << "\n";
  }
  if (!report.error.empty()) err << "error: " << report.error << "\n";
  out << "report: " << (dir / "report.json").string() << "\n";
  return report.ok ? 0 : 1;
}

}  // namespace edgeheat
