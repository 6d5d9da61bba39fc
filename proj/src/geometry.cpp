#include "edgeheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "edgeheat/specfun.hpp"

namespace edgeheat {

namespace {

constexpr double kPi = std::numbers::pi;

double binomial(int n, int k) {
  if (k < 0 || n < k) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

// Associated Legendre P_l^m(x) without the Condon-Shortley phase, together with P_{l-1}^m.
void assoc_legendre(int l, int m, double x, double& p_l, double& p_lm1) {
  double pmm = 1.0;
  const double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double fact = 1.0;
  for (int i = 1; i <= m; ++i) {
    pmm *= fact * somx2;
    fact += 2.0;
  }
  if (l == m) {
    p_l = pmm;
    p_lm1 = 0.0;
    return;
  }
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  double prev = pmm;
  double cur = pmmp1;
  for (int ll = m + 2; ll <= l; ++ll) {
    const double next = ((2.0 * ll - 1.0) * x * cur - (ll + m - 1.0) * prev) / (ll - m);
    prev = cur;
    cur = next;
  }
  p_l = cur;
  p_lm1 = prev;
}

double sh_norm(int l, int m) {
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) *
                   std::exp(std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0)));
}

}  // namespace

bool FiberSpectrum::has_eigenfunctions() const {
  return !entries.empty() && static_cast<bool>(entries.front().eigenfunction);
}

double FiberSpectrum::volume() const {
  // |S^f| = 2 pi^{(f+1)/2} / Gamma((f+1)/2), scaled by c^f.
  const double unit = 2.0 * std::pow(kPi, (fiber_dim + 1) / 2.0) / std::tgamma((fiber_dim + 1) / 2.0);
  return unit * std::pow(cone_scale, fiber_dim);
}

int FiberSpectrum::required_resolution() const { return 4 * max_mode + 1; }

FiberQuadrature FiberSpectrum::quadrature(int resolution) const {
  if (!has_eigenfunctions()) {
    throw std::invalid_argument("fiber quadrature requires eigenfunction evaluators (" + description + ")");
  }
  FiberQuadrature q;
  if (kind == FiberKind::Circle) {
    const int count = std::max(resolution, 1);
    q.points.resize(1, count);
    q.weights = Eigen::VectorXd::Constant(count, 2.0 * kPi * cone_scale / count);
    for (int i = 0; i < count; ++i) q.points(0, i) = 2.0 * kPi * i / count;
    return q;
  }
  // Gauss-Legendre in cos(theta) times a uniform rule in phi.
  const int n_theta = std::max((resolution + 2) / 2, 1);
  const int n_phi = std::max(resolution, 1);
  const QuadratureRule gl = gauss_legendre(n_theta, -1.0, 1.0);
  q.points.resize(2, static_cast<Eigen::Index>(n_theta) * n_phi);
  q.weights.resize(q.points.cols());
  const double c2 = cone_scale * cone_scale;
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * n_phi + j;
      q.points(0, idx) = std::acos(gl.nodes[i]);
      q.points(1, idx) = 2.0 * kPi * j / n_phi;
      q.weights[idx] = c2 * gl.weights[i] * 2.0 * kPi / n_phi;
    }
  }
  return q;
}

FiberQuadrature FiberSpectrum::dealiasing_quadrature() const { return quadrature(required_resolution()); }

FiberSpectrum circle_fiber(int max_mode, double cone_scale) {
  if (max_mode < 0) throw std::invalid_argument("circle_fiber: max_mode must be >= 0");
  if (!(cone_scale > 0.0)) throw std::invalid_argument("circle_fiber: cone_scale must be positive");
  FiberSpectrum spec;
  spec.kind = FiberKind::Circle;
  spec.fiber_dim = 1;
  spec.cone_scale = cone_scale;
  spec.max_mode = max_mode;
  std::ostringstream label;
  label << "circle(c=" << cone_scale << ", k<=" << max_mode << ")";
  spec.description = label.str();

  const double c = cone_scale;
  for (int k = 0; k <= max_mode; ++k) {
    FiberMode mode;
    mode.sigma_sq = (k / c) * (k / c);
    mode.multiplicity = k == 0 ? 1 : 2;
    mode.label = k;
    if (k == 0) {
      const double v = 1.0 / std::sqrt(2.0 * kPi * c);
      mode.eigenfunction = [v](std::span<const double>, int) { return v; };
      mode.gradient = [](std::span<const double>, int, std::span<double> g) { g[0] = 0.0; };
      mode.hessian = [](std::span<const double>, int, std::span<double> h) { h[0] = 0.0; };
    } else {
      const double a = 1.0 / std::sqrt(kPi * c);
      mode.eigenfunction = [a, k](std::span<const double> z, int copy) {
        return copy == 0 ? a * std::cos(k * z[0]) : a * std::sin(k * z[0]);
      };
      mode.gradient = [a, k](std::span<const double> z, int copy, std::span<double> g) {
        g[0] = copy == 0 ? -a * k * std::sin(k * z[0]) : a * k * std::cos(k * z[0]);
      };
      mode.hessian = [a, k](std::span<const double> z, int copy, std::span<double> h) {
        h[0] = -static_cast<double>(k * k) * (copy == 0 ? a * std::cos(k * z[0]) : a * std::sin(k * z[0]));
      };
    }
    spec.entries.push_back(std::move(mode));
  }
  return spec;
}

FiberSpectrum sphere_fiber(int fiber_dim, int max_degree, double cone_scale) {
  if (fiber_dim < 2) throw std::invalid_argument("sphere_fiber: fiber dimension must be >= 2");
  if (max_degree < 0) throw std::invalid_argument("sphere_fiber: max_degree must be >= 0");
  if (!(cone_scale > 0.0)) throw std::invalid_argument("sphere_fiber: cone_scale must be positive");
  FiberSpectrum spec;
  spec.kind = FiberKind::Sphere;
  spec.fiber_dim = fiber_dim;
  spec.cone_scale = cone_scale;
  spec.max_mode = max_degree;
  std::ostringstream label;
  label << "sphere(f=" << fiber_dim << ", c=" << cone_scale << ", l<=" << max_degree << ")";
  if (fiber_dim != 2) label << " spectrum-only";
  spec.description = label.str();

  const double c = cone_scale;
  const int f = fiber_dim;
  for (int l = 0; l <= max_degree; ++l) {
    FiberMode mode;
    mode.sigma_sq = l * (l + f - 1.0) / (c * c);
    mode.multiplicity = static_cast<int>(binomial(l + f, f) - binomial(l + f - 2, f));
    mode.label = l;
    if (f == 2) {
      // copy in [0, 2l] maps to m = copy - l; real harmonics, scaled to radius c.
      mode.eigenfunction = [l, c](std::span<const double> z, int copy) {
        const int m = copy - l;
        const int am = std::abs(m);
        double p = 0.0;
        double pm1 = 0.0;
        assoc_legendre(l, am, std::cos(z[0]), p, pm1);
        const double nrm = sh_norm(l, am) / c;
        if (m == 0) return nrm * p;
        const double trig = m > 0 ? std::cos(am * z[1]) : std::sin(am * z[1]);
        return std::sqrt(2.0) * nrm * p * trig;
      };
      mode.gradient = [l, c](std::span<const double> z, int copy, std::span<double> g) {
        const int m = copy - l;
        const int am = std::abs(m);
        const double x = std::cos(z[0]);
        const double st = std::sin(z[0]);
        double p = 0.0;
        double pm1 = 0.0;
        assoc_legendre(l, am, x, p, pm1);
        // d/dtheta P_l^m(cos theta) = (l x P_l^m - (l+m) P_{l-1}^m) / sin theta
        const double dp = st > 0.0 ? (l * x * p - (l + am) * pm1) / st : 0.0;
        double nrm = sh_norm(l, am) / c;
        double trig = 1.0;
        double dtrig = 0.0;
        if (m != 0) {
          nrm *= std::sqrt(2.0);
          trig = m > 0 ? std::cos(am * z[1]) : std::sin(am * z[1]);
          dtrig = m > 0 ? -am * std::sin(am * z[1]) : am * std::cos(am * z[1]);
        }
        g[0] = nrm * dp * trig;
        g[1] = nrm * p * dtrig;
      };
      mode.hessian = [l, c](std::span<const double> z, int copy, std::span<double> h) {
        const int m = copy - l;
        const int am = std::abs(m);
        const double x = std::cos(z[0]);
        const double st = std::sin(z[0]);
        double p = 0.0;
        double pm1 = 0.0;
        assoc_legendre(l, am, x, p, pm1);
        const double dp = st > 0.0 ? (l * x * p - (l + am) * pm1) / st : 0.0;
        // Legendre equation: P'' = -cot(theta) P' - (l(l+1) - m^2 / sin^2 theta) P
        const double d2p = st > 0.0 ? -(x / st) * dp - (l * (l + 1.0) - am * am / (st * st)) * p : 0.0;
        double nrm = sh_norm(l, am) / c;
        double trig = 1.0;
        double dtrig = 0.0;
        if (m != 0) {
          nrm *= std::sqrt(2.0);
          trig = m > 0 ? std::cos(am * z[1]) : std::sin(am * z[1]);
          dtrig = m > 0 ? -am * std::sin(am * z[1]) : am * std::cos(am * z[1]);
        }
        h[0] = nrm * d2p * trig;
        h[1] = nrm * dp * dtrig;
        h[2] = h[1];
        h[3] = -static_cast<double>(am * am) * nrm * p * trig;
      };
    }
    spec.entries.push_back(std::move(mode));
  }
  return spec;
}

EdgeGeometry make_geometry(int b, FiberSpectrum fiber, double s_max) {
  if (b < 0) throw std::invalid_argument("edge dimension b must be >= 0");
  if (!(s_max > 0.0)) throw std::invalid_argument("s_max must be positive");
  if (fiber.entries.empty() || fiber.entries.front().sigma_sq != 0.0) {
    throw std::invalid_argument("fiber spectrum must start with the zero eigenvalue");
  }
  EdgeGeometry g;
  g.b = b;
  g.fiber = std::move(fiber);
  g.s_max = s_max;
  return g;
}

double nu_of_sigma(double sigma_sq, int fiber_dim) {
  if (sigma_sq < 0.0) throw std::domain_error("nu_of_sigma: eigenvalue must be non-negative");
  const double shift = (fiber_dim - 1) / 2.0;
  return std::sqrt(sigma_sq + shift * shift);
}

IndicialRoots indicial_roots(double nu) {
  if (nu < 0.0) throw std::domain_error("indicial_roots: nu must be non-negative");
  return {nu + 0.5, -nu + 0.5, nu == 0.0};
}

std::vector<double> IndexSet::exponents() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.gamma);
  return out;
}

bool IndexSet::contains(double gamma, double tol) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const IndexEntry& e) { return std::fabs(e.gamma - gamma) <= tol; });
}

IndexSet index_set(const EdgeGeometry& geom, double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("index_set: cutoff must be positive");
  const int f = geom.fiber_dim();
  struct Raw {
    double gamma;
    IndexSource src;
  };
  std::vector<Raw> raw;
  for (const auto& mode : geom.fiber.entries) {
    const double base = -(f - 1) / 2.0 + nu_of_sigma(mode.sigma_sq, f);
    for (int j = 0; base + 2.0 * j < cutoff; ++j) raw.push_back({base + 2.0 * j, {mode.sigma_sq, j}});
  }
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.gamma < b.gamma; });
  IndexSet set;
  for (const auto& r : raw) {
    if (!set.entries.empty() && std::fabs(set.entries.back().gamma - r.gamma) <= 1e-9) {
      set.entries.back().sources.push_back(r.src);
    } else {
      set.entries.push_back({r.gamma, {r.src}});
    }
  }
  return set;
}

AdmissibilityReport check_admissible(const EdgeGeometry& geom) {
  AdmissibilityReport report;
  const auto& entries = geom.fiber.entries;
  auto it = std::find_if(entries.begin(), entries.end(), [](const FiberMode& m) { return m.sigma_sq > 0.0; });
  if (it == entries.end()) {
    report.note = "indeterminate: spectrum truncated to the zero mode";
    return report;
  }
  report.lambda0 = it->sigma_sq;
  report.admissible_i = report.lambda0 > geom.fiber_dim();
  std::ostringstream note;
  note << "lambda0 = " << report.lambda0 << (*report.admissible_i ? " > " : " <= ") << "dim F = " << geom.fiber_dim();
  report.note = note.str();
  return report;
}

}  // namespace edgeheat
