// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "edgeheat/cahn_hilliard.hpp"
#include "edgeheat/cli.hpp"
#include "edgeheat/hankel.hpp"
#include "edgeheat/kernel.hpp"
#include "edgeheat/oracle.hpp"
#include "edgeheat/semigroup.hpp"
#include "oracles.hpp"

using namespace edgeheat;
namespace fs = std::filesystem;

namespace tol {
constexpr double hankel = 1e-8;
constexpr double second_order = 1e-8;
constexpr double homogeneity = 1e-8;
constexpr double homogeneity_order = 1e-3;
constexpr double completeness = 1e-5;
constexpr double semigroup = 1e-5;
constexpr double oracle_kernel = 1e-3;
constexpr double exponent = 0.02;
constexpr double slope_lo = -0.30, slope_hi = -0.05;
constexpr double identity_slope = 0.02;
constexpr double continuity = 1e-3;
constexpr double contraction = 0.9;
constexpr double min_interval = 1e-3;
constexpr double ch_oracle = 1e-2;
constexpr double mass_drift = 1e-6;
constexpr double energy_step = 1e-8;
constexpr double fixed_point = 1e-12;
constexpr double tip_exponent = 0.05;
}  // namespace tol

namespace {

// Default setting: cone, circle fiber f = 1, cone_scale 0.5, modes k <= 4.
constexpr double kConeScale = 0.5;
constexpr int kMaxMode = 4;

EdgeGeometry default_cone(double s_max) { return make_geometry(0, circle_fiber(kMaxMode, kConeScale), s_max); }

std::vector<double> default_orders() {
  std::vector<double> nus;
  for (const auto& m : default_cone(10.0).fiber.entries) nus.push_back(nu_of_sigma(m.sigma_sq, 1));
  return nus;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome hankel_isometry() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  double norm_dev = 0.0, involution = 0.0;
  for (double nu : {0.0, 0.5, 1.0, 2.5}) {
    for (int n : {64, 128}) {
      const HankelPlan p = build_plan(nu, n, 10.0);
      for (int r = 0; r < 20; ++r) {
        Eigen::VectorXd u(n);
        for (int i = 0; i < n; ++i) u[i] = g(rng);
        const double nu0 = physical_norm(p, u);
        norm_dev = std::max(norm_dev, std::abs(spectral_norm(p, forward(p, u)) - nu0) / nu0);
        involution = std::max(involution, (p.transform_matrix * (p.transform_matrix * u) - u).norm() / u.norm());
      }
    }
  }
  return {norm_dev <= tol::hankel && involution <= tol::hankel,
          fmt("norm deviation %.2e", norm_dev) + fmt(", double application %.2e", involution) + fmt(" (tol %.0e)", tol::hankel)};
}

Outcome second_order_cross_check() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> nus = default_orders();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double nu = nus[i % nus.size()];
    const double t = 0.05 + 0.95 * u(rng), s = 0.1 + 2.9 * u(rng), st = 0.1 + 2.9 * u(rng);
    const double q = mode_integral(nu, s, st, [t](double rho) { return std::exp(-t * rho * rho); }, std::sqrt(46.0 / t));
    const double ref = oracles::second_order_cone_kernel(nu, t, s, st);
    worst = std::max(worst, std::abs(q - ref) / std::abs(ref));
  }
  return {worst <= tol::second_order, fmt("max relative error %.2e", worst) + fmt(" (tol %.0e)", tol::second_order)};
}

Outcome homogeneity() {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (double nu : default_orders()) {
    for (int i = 0; i < 5; ++i) {
      const double t = 0.05 + 0.45 * u(rng), s = 0.1 + 1.4 * u(rng), st = 0.1 + 1.4 * u(rng);
      const double base = cone_mode_kernel(nu, t, s, st);
      for (double lam : {2.0, 3.0}) {
        const double scaled = cone_mode_kernel(nu, std::pow(lam, 4) * t, lam * s, lam * st);
        worst = std::max(worst, std::abs(lam * scaled - base) / std::abs(base));
      }
    }
  }
  // Scaling order of the geometric kernel along (l^4 t, l p, l p~).
  const EdgeGeometry g = default_cone(10.0);
  const std::vector<double> z = {0.4}, zt = {1.1};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const std::vector<double> lams = {1.0, 1.4, 2.0, 2.8, 4.0};
  for (double lam : lams) {
    const double h = geometric_cone_kernel(g, std::pow(lam, 4) * 0.1, 0.5 * lam, z, 0.8 * lam, zt);
    const double x = std::log(lam), y = std::log(std::abs(h));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double m = double(lams.size());
  const double order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double order_err = std::abs(order + 2.0);
  return {worst <= tol::homogeneity && order_err <= tol::homogeneity_order,
          fmt("mode scaling %.2e", worst) + fmt(" (tol %.0e)", tol::homogeneity) + fmt(", geometric order %.6f", order) +
              fmt(" vs -2 (tol %.0e)", tol::homogeneity_order)};
}

Outcome stochastic_completeness() {
  const EdgeGeometry g = default_cone(20.0);
  double worst = 0.0;
  for (double t : {0.05, 0.2}) worst = std::max(worst, check_stochastic_completeness(g, t, 10).residual);
  return {worst <= tol::completeness, fmt("max |int H dvol - 1| %.2e", worst) + fmt(" (tol %.0e, s_max 20)", tol::completeness)};
}

Outcome semigroup() {
  const EdgeGeometry g = default_cone(20.0);
  const int n = 256;
  double worst = 0.0;
  for (auto [t1, t2] : {std::pair{0.1, 0.1}, std::pair{0.05, 0.2}}) {
    worst = std::max(worst, check_semigroup(assemble_table(g, t1, n), assemble_table(g, t2, n), assemble_table(g, t1 + t2, n)));
  }
  return {worst <= tol::semigroup, fmt("max composition residual %.2e", worst) + fmt(" (tol %.0e, n 256, s_max 20)", tol::semigroup)};
}

Outcome oracle_kernel() {
  double worst = 0.0;
  for (double nu : {0.0, 1.0}) {
    const FDOperator op = build_fd(nu, 512, 20.0);
    const Eigen::MatrixXd k = fd_biharmonic_kernel(op, 0.1);
    double err = 0.0, scale = 0.0;
    for (int i = op.n / 4; i < 3 * op.n / 4; i += 4) {
      for (int j = op.n / 4; j < 3 * op.n / 4; j += 4) {
        const double ref = cone_mode_kernel(nu, 0.1, op.nodes[i], op.nodes[j]);
        err = std::max(err, std::abs(k(i, j) - ref));
        scale = std::max(scale, std::abs(ref));
      }
    }
    worst = std::max(worst, err / scale);
  }
  return {worst <= tol::oracle_kernel, fmt("sup-relative error %.2e", worst) + fmt(" (tol %.0e)", tol::oracle_kernel)};
}

Outcome friedrichs_exponents() {
  double worst = 0.0;
  bool log_ok = true;
  Eigen::VectorXd s(7), v(7);
  for (double nu : default_orders()) {
    for (int i = 0; i < 7; ++i) {
      s[i] = std::pow(2.0, -3 - i);
      v[i] = cone_mode_kernel(nu, 0.1, s[i], 1.0);
    }
    const ExponentFit f = fit_leading_exponent(s, v);
    worst = std::max(worst, std::abs(f.gamma - (nu + 0.5)));
    if (nu > 0 && f.log_flag) log_ok = false;
  }
  return {worst <= tol::exponent && log_ok,
          fmt("max |gamma - (nu + 1/2)| %.2e", worst) + fmt(" (tol %.2f)", tol::exponent) + (log_ok ? ", no log terms" : ", spurious log term")};
}

Outcome mapping_bound() {
  const auto d = make_discretization(default_cone(10.0), 128);
  const EdgeField bump = radial_field(d, [](double s, double) { return std::exp(-(s - 1) * (s - 1)); }, Convention::Geometric);
  std::vector<double> times;
  for (int i = 0; i <= 8; ++i) times.push_back(1e-3 * std::pow(10.0, i / 4.0));
  const double slope = decay_exponent(bump, Derivative::WeightedRadial, times).slope;
  const double id = decay_exponent(bump, Derivative::Identity, times).slope;

  const EdgeField wide = radial_field(d, [](double s, double) { return std::exp(-s * s / 8); }, Convention::Geometric);
  const auto rows = strong_continuity_check(wide, 1, {1e-1, 1e-2, 1e-3, 1e-4});
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].difference < rows[i - 1].difference;
  const double last = rows.back().difference;
  const bool pass = slope >= tol::slope_lo && slope <= tol::slope_hi && std::abs(id) <= tol::identity_slope && decreasing &&
                    last <= tol::continuity;
  return {pass, fmt("x^-1 s d_s slope %.3f", slope) + " in [-0.30, -0.05]" + fmt(", identity slope %.4f", id) +
                    fmt(", continuity at 1e-4 %.2e", last) + (decreasing ? " (decreasing)" : " (NOT decreasing)")};
}

Outcome cahn_hilliard() {
  const auto d = make_discretization(default_cone(20.0), 256);
  const EdgeField u0 = radial_field(d, [](double s, double) { return 0.1 * std::exp(-(s - 1) * (s - 1)); }, Convention::Geometric);
  const Trajectory tr = picard_solve(u0, SolverConfig{});
  if (!tr.converged) return {false, "picard iteration failed: " + tr.message};
  const Diagnostics diag = diagnostics(tr);

  const FDOperator op = build_fd(0.0, 512, 20.0);
  const Eigen::VectorXd w0 = (0.1 * (-(op.nodes.array() - 1).square()).exp()).matrix();
  const FDSolveResult ref = fd_ch_solve(op, w0, 0.0, tr.T, 8);
  const Eigen::VectorXd sp = component_profile(tr.fields.back(), 0, op.nodes) / std::sqrt(d->geometry().fiber.volume());
  const int inner = 3 * op.n / 4;
  const double match = (sp - ref.values).head(inner).cwiseAbs().maxCoeff() / ref.values.head(inner).cwiseAbs().maxCoeff();

  double fixed = 0.0;
  for (double c : {-1.0, 0.0, 1.0}) {
    const EdgeField k = constant_field(d, c, Convention::Geometric);
    const Trajectory t = picard_solve(k, SolverConfig{});
    fixed = std::max(fixed, t.converged ? nodal_sup(t.fields.back() - to_rescaled(k)) + std::abs(t.fields.back().far_field - c) : 1.0);
  }
  const bool pass = tr.max_contraction() < tol::contraction && tr.T >= tol::min_interval && ref.converged &&
                    match <= tol::ch_oracle && diag.mass_drift <= tol::mass_drift &&
                    diag.max_energy_increase <= tol::energy_step && fixed <= tol::fixed_point;
  return {pass, fmt("contraction %.3f", tr.max_contraction()) + fmt(" at T %.3g", tr.T) + fmt(", oracle %.2e", match) +
                    fmt(", mass drift %.2e", diag.mass_drift) + fmt(", energy rise %.1e", diag.max_energy_increase) +
                    fmt(", constants %.1e", fixed)};
}

Outcome solution_asymptotics() {
  const auto d = make_discretization(default_cone(20.0), 256);
  const EdgeField u0 =
      radial_field(d, [](double s, double) { return 0.1 * std::exp(-(s - 1) * (s - 1)); }, Convention::Geometric) +
      mode_field(d, 1, [](double s, double) { return 0.1 * s * s * std::exp(-(s - 1) * (s - 1)); }, Convention::Geometric);
  const Trajectory tr = picard_solve(u0, SolverConfig{});
  if (!tr.converged) return {false, "picard iteration failed: " + tr.message};
  const double expected = nu_of_sigma(1.0 / (kConeScale * kConeScale), 1);  // -(f-1)/2 + nu(k^2/c^2), f = 1
  for (const TipFit& f : tip_exponents(tr.fields.back())) {
    if (f.entry != 1 || !f.fitted) continue;
    const double dev = std::abs(f.gamma - expected);
    return {dev <= tol::tip_exponent && !f.log_flag,
            fmt("mode-1 exponent %.5f", f.gamma) + fmt(" vs %.1f", expected) + fmt(" (tol %.2f)", tol::tip_exponent)};
  }
  return {false, "no mode-1 content at T"};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "edgeheat_acceptance_cli";
  fs::remove_all(root);
  const nlohmann::json doc = {
      {"geometry", {{"b", 0}, {"fiber", {{"kind", "circle"}, {"f", 1}, {"max_mode", kMaxMode}, {"cone_scale", kConeScale}}}}},
      {"task", "verify"},
      {"seed", 2024}};
  const RunConfig cfg = parse_config(doc);
  const RunReport a = execute(cfg, root / "a");
  execute(cfg, root / "b");
  int compared = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    ++compared;
    if (fs::exists(other) && slurp(entry.path()) == slurp(other)) ++identical;
  }
  fs::remove_all(root);
  return {compared > 0 && compared == identical && a.error.empty(),
          std::to_string(identical) + "/" + std::to_string(compared) + " CSVs byte-identical; verify checks " +
              (a.ok ? "all pass" : "NOT all passing")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hankel isometry", hankel_isometry},
      {"second-order cross-check", second_order_cross_check},
      {"homogeneity", homogeneity},
      {"stochastic completeness", stochastic_completeness},
      {"semigroup", semigroup},
      {"oracle kernel match", oracle_kernel},
      {"friedrichs exponents", friedrichs_exponents},
      {"mapping bound", mapping_bound},
      {"cahn-hilliard fixed point", cahn_hilliard},
      {"solution asymptotics", solution_asymptotics},
      {"cli determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
