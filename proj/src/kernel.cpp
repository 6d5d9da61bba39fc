#include "edgeheat/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "edgeheat/hankel.hpp"
#include "edgeheat/io.hpp"

namespace edgeheat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPanelOrder = 12;

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    std::ostringstream msg;
    msg << "heat kernel time must be positive, got " << t;
    throw std::domain_error(msg.str());
  }
}

QuadratureRule panel_rule(double upper, double width) {
  const int panels = std::max(1, static_cast<int>(std::ceil(upper / width)));
  return composite_gauss_legendre(kPanelOrder, panels, 0.0, upper);
}

double quartic_multiplier(double t, double rho) { return std::exp(-t * rho * rho * rho * rho); }

// Rows sqrt(s_i) J_nu(s_i rho_q).
Eigen::MatrixXd bessel_rows(double nu, const Eigen::VectorXd& s, const Eigen::VectorXd& rho) {
  const BesselOrder order(nu);
  Eigen::MatrixXd b(s.size(), rho.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double root = std::sqrt(s[i]);
    for (Eigen::Index q = 0; q < rho.size(); ++q) b(i, q) = root * bessel_j(order, s[i] * rho[q]);
  }
  return b;
}

Eigen::VectorXd table_multiplier(int b, double t, double r, const Eigen::VectorXd& rho) {
  Eigen::VectorXd m(rho.size());
  for (Eigen::Index q = 0; q < rho.size(); ++q) {
    m[q] = b == 0 ? quartic_multiplier(t, rho[q]) : edge_multiplier(b, t, rho[q], r);
  }
  return m;
}

}  // namespace

ModeKernelSpec make_kernel_spec(double nu, int b, double t, double s_extent) {
  check_time(t);
  ModeKernelSpec spec;
  spec.nu = nu;
  spec.b = b;
  spec.t = t;
  spec.rho_cut = std::pow(kCutoffExponent / t, 0.25);
  const double oscillation = kPi / (2.0 * std::max(s_extent, 1.0));
  spec.panel_width = std::min(oscillation, spec.rho_cut / 24.0);
  spec.panels = std::max(1, static_cast<int>(std::ceil(spec.rho_cut / spec.panel_width)));
  spec.panel_width = spec.rho_cut / spec.panels;
  return spec;
}

QuadratureRule spectral_rule(const ModeKernelSpec& spec) {
  return composite_gauss_legendre(kPanelOrder, spec.panels, 0.0, spec.rho_cut);
}

double mode_integral(double nu, double s, double s_tilde, const RadialMultiplier& m, double rho_cut) {
  if (s < 0.0 || s_tilde < 0.0) throw std::domain_error("mode_integral: radii must be non-negative");
  const BesselOrder order(nu);
  const double width = std::min(kPi / (2.0 * std::max({s, s_tilde, 1.0})), rho_cut / 24.0);
  const QuadratureRule rule = panel_rule(rho_cut, width);
  const double root = std::sqrt(s * s_tilde);
  if (root == 0.0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    const double rho = rule.nodes[q];
    sum += rule.weights[q] * bessel_j(order, s * rho) * bessel_j(order, s_tilde * rho) * rho * m(rho);
  }
  return root * sum;
}

double cone_mode_kernel(double nu, double t, double s, double s_tilde) {
  check_time(t);
  const double rho_cut = std::pow(kCutoffExponent / t, 0.25);
  return mode_integral(nu, s, s_tilde, [t](double rho) { return quartic_multiplier(t, rho); }, rho_cut);
}

double edge_multiplier(int b, double t, double rho, double r) {
  check_time(t);
  if (b < 1) throw std::invalid_argument("edge_multiplier: edge dimension must be >= 1");
  r = std::fabs(r);
  const double reach = std::sqrt(kCutoffExponent / t) - rho * rho;
  if (reach <= 0.0) return 0.0;
  const double xi_cut = std::sqrt(reach);
  const double width = std::min(kPi / (2.0 * std::max(r, 1.0)), xi_cut / 24.0);
  const QuadratureRule rule = panel_rule(xi_cut, width);
  auto g = [t, rho](double xi) {
    const double q = rho * rho + xi * xi;
    return std::exp(-t * q * q);
  };
  if (b == 1) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < rule.size(); ++i) sum += rule.weights[i] * std::cos(r * rule.nodes[i]) * g(rule.nodes[i]);
    return sum / kPi;
  }
  const double half = b / 2.0;
  const double prefactor = std::pow(2.0 * kPi, -half);
  double sum = 0.0;
  if (r == 0.0) {
    // J_{b/2-1}(r q) r^{1-b/2} -> q^{b/2-1} / (2^{b/2-1} Gamma(b/2))
    const double c = 1.0 / (std::pow(2.0, half - 1.0) * std::tgamma(half));
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
      const double q = rule.nodes[i];
      sum += rule.weights[i] * c * std::pow(q, b - 1.0) * g(q);
    }
    return prefactor * sum;
  }
  const BesselOrder order(half - 1.0);
  for (Eigen::Index i = 0; i < rule.size(); ++i) {
    const double q = rule.nodes[i];
    sum += rule.weights[i] * bessel_j(order, r * q) * std::pow(q, half) * g(q);
  }
  return prefactor * std::pow(r, 1.0 - half) * sum;
}

double edge_mode_kernel(double nu, int b, double t, double s, double s_tilde, double r) {
  check_time(t);
  if (b < 1) throw std::invalid_argument("edge_mode_kernel: edge dimension must be >= 1");
  const double rho_cut = std::pow(kCutoffExponent / t, 0.25);
  return mode_integral(nu, s, s_tilde, [&](double rho) { return edge_multiplier(b, t, rho, r); }, rho_cut);
}

double geometric_cone_kernel(const EdgeGeometry& geom, double t, double s, std::span<const double> z, double s_tilde,
                             std::span<const double> z_tilde) {
  if (!(s > 0.0) || !(s_tilde > 0.0)) throw std::domain_error("geometric kernel needs s, s~ > 0");
  if (!geom.fiber.has_eigenfunctions()) throw std::invalid_argument("geometric kernel needs fiber eigenfunctions");
  const int f = geom.fiber_dim();
  double sum = 0.0;
  for (const auto& mode : geom.fiber.entries) {
    double angular = 0.0;
    for (int c = 0; c < mode.multiplicity; ++c) angular += mode.eigenfunction(z, c) * mode.eigenfunction(z_tilde, c);
    if (angular == 0.0) continue;
    sum += angular * cone_mode_kernel(nu_of_sigma(mode.sigma_sq, f), t, s, s_tilde);
  }
  return std::pow(s * s_tilde, -0.5 * f) * sum;
}

Eigen::MatrixXd KernelTable::geometric(std::size_t mode) const {
  const ModeTable& m = modes.at(mode);
  const Eigen::VectorXd scale = m.nodes.array().pow(-0.5 * geometry.fiber_dim()).matrix();
  return scale.asDiagonal() * m.values * scale.asDiagonal();
}

KernelTable assemble_table(const EdgeGeometry& geom, double t, int n, KernelPath path, double r) {
  check_time(t);
  if (t < kMinTabulationTime) {
    std::ostringstream msg;
    msg << "t = " << t << " is below the tabulation floor " << kMinTabulationTime
        << "; the near-diagonal kernel is sharper than the radial grid resolves. Use t >= " << kMinTabulationTime
        << " or evaluate pointwise with cone_mode_kernel.";
    throw std::invalid_argument(msg.str());
  }
  if (geom.b == 0 && r != 0.0) throw std::invalid_argument("assemble_table: edge separation requires b >= 1");

  KernelTable table;
  table.geometry = geom;
  table.t = t;
  table.r = r;
  table.n = n;
  table.path = path;

  const int f = geom.fiber_dim();
  const ModeKernelSpec spec = make_kernel_spec(0.0, geom.b, t, geom.s_max);
  const QuadratureRule rule = spectral_rule(spec);
  Eigen::VectorXd quad_weight;
  if (path == KernelPath::Quadrature) {
    quad_weight = (rule.weights.array() * rule.nodes.array() *
                   table_multiplier(geom.b, t, r, rule.nodes).array())
                      .matrix();
  }

  for (std::size_t e = 0; e < geom.fiber.entries.size(); ++e) {
    const FiberMode& fm = geom.fiber.entries[e];
    const double nu = nu_of_sigma(fm.sigma_sq, f);
    const HankelPlan plan = build_plan(nu, n, geom.s_max);
    ModeTable mt;
    mt.entry = static_cast<int>(e);
    mt.sigma_sq = fm.sigma_sq;
    mt.nu = nu;
    mt.multiplicity = fm.multiplicity;
    mt.nodes = plan.s_nodes;
    mt.weights = plan.s_weights;
    if (path == KernelPath::Quadrature) {
      const Eigen::MatrixXd b = bessel_rows(nu, plan.s_nodes, rule.nodes);
      mt.values = b * quad_weight.asDiagonal() * b.transpose();
    } else {
      const Eigen::VectorXd m = table_multiplier(geom.b, t, r, plan.rho_nodes);
      const Eigen::VectorXd scale = plan.s_weights.cwiseSqrt().cwiseInverse();
      mt.values = scale.asDiagonal() * (plan.transform_matrix * m.asDiagonal() * plan.transform_matrix) *
                  scale.asDiagonal();
    }
    mt.values = 0.5 * (mt.values + mt.values.transpose()).eval();
    table.modes.push_back(std::move(mt));
  }
  return table;
}

namespace {

void check_compatible(const KernelTable& a, const KernelTable& b) {
  if (a.n != b.n || a.modes.size() != b.modes.size() || a.geometry.s_max != b.geometry.s_max ||
      a.geometry.b != b.geometry.b || a.r != b.r) {
    throw std::invalid_argument("kernel tables do not share grid and geometry");
  }
  for (std::size_t m = 0; m < a.modes.size(); ++m) {
    if (a.modes[m].nu != b.modes[m].nu) throw std::invalid_argument("kernel tables do not share fiber modes");
  }
}

Eigen::Index interior_count(const Eigen::VectorXd& nodes, double limit) {
  Eigen::Index count = 0;
  while (count < nodes.size() && nodes[count] <= limit) ++count;
  return count;
}

}  // namespace

double table_difference(const KernelTable& a, const KernelTable& b, double interior_fraction) {
  check_compatible(a, b);
  double worst = 0.0;
  for (std::size_t m = 0; m < a.modes.size(); ++m) {
    const Eigen::Index k = interior_count(a.modes[m].nodes, interior_fraction * a.geometry.s_max);
    const double scale = b.modes[m].values.topLeftCorner(k, k).cwiseAbs().maxCoeff();
    const double diff = (a.modes[m].values - b.modes[m].values).topLeftCorner(k, k).cwiseAbs().maxCoeff();
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

double check_semigroup(const KernelTable& t1, const KernelTable& t2, const KernelTable& t12) {
  check_compatible(t1, t2);
  check_compatible(t1, t12);
  if (std::fabs(t1.t + t2.t - t12.t) > 1e-12 * t12.t) {
    throw std::invalid_argument("check_semigroup: third table must be at t1 + t2");
  }
  double worst = 0.0;
  for (std::size_t m = 0; m < t1.modes.size(); ++m) {
    const auto& a = t1.modes[m];
    const Eigen::MatrixXd composed = a.values * a.weights.asDiagonal() * t2.modes[m].values;
    const Eigen::Index k = interior_count(a.nodes, 0.5 * t1.geometry.s_max);
    const Eigen::MatrixXd& direct = t12.modes[m].values;
    const double scale = direct.topLeftCorner(k, k).cwiseAbs().maxCoeff();
    worst = std::max(worst, (composed - direct).topLeftCorner(k, k).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

double check_edge_semigroup(const EdgeGeometry& geom, double t1, double t2, int n, int panels) {
  if (geom.b < 1) throw std::invalid_argument("check_edge_semigroup: needs b >= 1");
  if (!(t1 > 0.0 && t2 > 0.0)) throw std::invalid_argument("check_edge_semigroup: times must be positive");
  const double R = 14.0 * std::pow(std::max(t1, t2), 0.25);
  const QuadratureRule rule = composite_gauss_legendre(8, panels, 0.0, R);
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * geom.b) / std::tgamma(0.5 * geom.b);
  const KernelTable direct = assemble_table(geom, t1 + t2, n, KernelPath::Spectral, 0.0);
  std::vector<Eigen::MatrixXd> composed(direct.modes.size());
  for (std::size_t m = 0; m < composed.size(); ++m) composed[m] = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
    const double r = rule.nodes[q];
    const double w = sphere * rule.weights[q] * std::pow(r, geom.b - 1);
    const KernelTable a = assemble_table(geom, t1, n, KernelPath::Spectral, r);
    const KernelTable b = assemble_table(geom, t2, n, KernelPath::Spectral, r);
    for (std::size_t m = 0; m < composed.size(); ++m) {
      composed[m] += w * a.modes[m].values * a.modes[m].weights.asDiagonal() * b.modes[m].values;
    }
  }
  double worst = 0.0;
  for (std::size_t m = 0; m < composed.size(); ++m) {
    const Eigen::Index k = interior_count(direct.modes[m].nodes, 0.5 * geom.s_max);
    const Eigen::MatrixXd& d = direct.modes[m].values;
    const double scale = d.topLeftCorner(k, k).cwiseAbs().maxCoeff();
    worst = std::max(worst, (composed[m] - d).topLeftCorner(k, k).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

CompletenessReport check_stochastic_completeness(const EdgeGeometry& geom, double t, int n_points, double s_lo,
                                                 double s_hi) {
  check_time(t);
  if (n_points < 1 || !(s_lo > 0.0) || s_hi < s_lo || s_hi >= geom.s_max) {
    throw std::invalid_argument("check_stochastic_completeness: need 0 < s_lo <= s_hi < s_max and n_points >= 1");
  }
  const int f = geom.fiber_dim();
  const double nu0 = nu_of_sigma(0.0, f);
  const double scale = std::pow(t, 0.25);

  CompletenessReport report;
  report.t = t;
  report.points = Eigen::VectorXd::LinSpaced(n_points, s_lo, s_hi);

  const double width = std::min(0.5 * scale, 0.25);
  const QuadratureRule radial = panel_rule(geom.s_max, width);
  const ModeKernelSpec spec = make_kernel_spec(nu0, 0, t, geom.s_max);
  const QuadratureRule rule = spectral_rule(spec);
  const Eigen::VectorXd w = (rule.weights.array() * rule.nodes.array() *
                             (-t * rule.nodes.array().pow(4)).exp())
                                .matrix();
  const Eigen::MatrixXd bp = bessel_rows(nu0, report.points, rule.nodes);
  const Eigen::MatrixXd bs = bessel_rows(nu0, radial.nodes, rule.nodes);
  const Eigen::MatrixXd k = bp * w.asDiagonal() * bs.transpose();
  const Eigen::VectorXd measure = (radial.weights.array() * radial.nodes.array().pow(0.5 * f)).matrix();

  report.integrals = (k * measure).array() * report.points.array().pow(-0.5 * f);
  report.residual = (report.integrals.array() - 1.0).abs().maxCoeff();

  // Tail: integrand size over the last kernel scale before s_max, times a few
  // decay lengths.
  double tail = 0.0;
  for (Eigen::Index p = 0; p < report.points.size(); ++p) {
    for (Eigen::Index j = 0; j < radial.size(); ++j) {
      if (radial.nodes[j] < geom.s_max - scale) continue;
      const double v = std::fabs(k(p, j)) * std::pow(radial.nodes[j], 0.5 * f) * std::pow(report.points[p], -0.5 * f);
      tail = std::max(tail, 4.0 * scale * v);
    }
  }
  report.tail_bound = tail;
  report.tail_ok = tail <= 1e-6;
  return report;
}

ExponentFit fit_leading_exponent(const Eigen::Ref<const Eigen::VectorXd>& s, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (s.size() != v.size()) throw std::invalid_argument("fit_leading_exponent: size mismatch");
  const Eigen::Index n = s.size();
  if (n < 5) throw ExponentFitError("exponent fit needs at least 5 samples");
  if ((s.array() <= 0.0).any()) throw ExponentFitError("exponent fit needs positive radii");
  const double span = std::log10(s.maxCoeff() / s.minCoeff());
  if (span < 1.5) {
    std::ostringstream msg;
    msg << "exponent fit needs radii spanning >= 1.5 decades, got " << span;
    throw ExponentFitError(msg.str());
  }
  const bool positive = v[0] > 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v[i] == 0.0 || (v[i] > 0.0) != positive) {
      std::ostringstream msg;
      msg << "exponent fit refused: values change sign or vanish (index " << i << ", s = " << s[i]
          << ", v = " << v[i] << ")";
      throw ExponentFitError(msg.str());
    }
  }
  const Eigen::VectorXd x = s.array().log();
  const Eigen::VectorXd y = v.array().abs().log();
  Eigen::MatrixXd a(n, 2);
  a.col(0) = x;
  a.col(1).setOnes();
  auto solve = [&](const Eigen::VectorXd& rhs, double& rms) {
    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(rhs);
    rms = std::sqrt((a * coef - rhs).squaredNorm() / static_cast<double>(n));
    return coef;
  };

  ExponentFit fit;
  const Eigen::Vector2d power = solve(y, fit.residual_power);
  fit.gamma = power[0];
  fit.intercept = power[1];
  fit.residual_log = std::numeric_limits<double>::infinity();
  if ((s.array() < 1.0).all()) {
    const Eigen::VectorXd ylog = y.array() - x.array().abs().log();
    const Eigen::Vector2d logc = solve(ylog, fit.residual_log);
    // The log model is selected only when it explains the data decisively better.
    if (fit.residual_log < 0.1 * fit.residual_power) {
      fit.log_flag = true;
      fit.gamma = logc[0];
      fit.intercept = logc[1];
    }
  }
  return fit;
}

std::filesystem::path export_table(const KernelTable& table, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["t"] = table.t;
  manifest["r"] = table.r;
  manifest["n"] = table.n;
  manifest["path"] = table.path == KernelPath::Quadrature ? "quadrature" : "spectral";
  manifest["convention"] = "phi-rescaled";
  manifest["geometry"] = geometry_to_json(table.geometry);
  manifest["modes"] = nlohmann::json::array();
  for (const ModeTable& m : table.modes) {
    const std::string file = stem + "_mode" + std::to_string(m.entry) + ".csv";
    std::string csv = "s";
    for (Eigen::Index j = 0; j < m.nodes.size(); ++j) csv += "," + format_number(m.nodes[j]);
    csv += "\n";
    for (Eigen::Index i = 0; i < m.nodes.size(); ++i) {
      csv += format_number(m.nodes[i]);
      for (Eigen::Index j = 0; j < m.nodes.size(); ++j) csv += "," + format_number(m.values(i, j));
      csv += "\n";
    }
    write_text(dir / file, csv);
    manifest["modes"].push_back(
        {{"file", file}, {"entry", m.entry}, {"sigma_sq", m.sigma_sq}, {"nu", m.nu}, {"multiplicity", m.multiplicity}});
  }
  const auto path = dir / (stem + ".json");
  write_text(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace edgeheat
