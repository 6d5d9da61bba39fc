#include "edgeheat/specfun.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace edgeheat {

namespace {

constexpr double kPi = std::numbers::pi;

long double series_j(long double nu, long double x) {
  const long double half = x / 2.0L;
  long double term = std::exp(nu * std::log(half) - std::lgamma(nu + 1.0L));
  long double sum = term;
  const long double q = half * half;
  for (int k = 1; k < 500; ++k) {
    term *= -q / (static_cast<long double>(k) * (k + nu));
    sum += term;
    if (k > half && std::fabs(term) < 1e-22L * std::fabs(sum)) break;
  }
  return sum;
}

// Hankel expansion; returns false if the terms stop decreasing before
// reaching double precision.
bool asymptotic_j(double nu, double x, double& out) {
  const long double mu = 4.0L * nu * nu;
  long double p = 1.0L;
  long double q = 0.0L;
  long double term = 1.0L;
  long double prev = 1.0L;
  bool converged = false;
  for (int k = 1; k < 200; ++k) {
    const long double odd = 2.0L * k - 1.0L;
    term *= (mu - odd * odd) / (k * 8.0L * x);
    const long double mag = std::fabs(term);
    if (k > 2 && mag > prev && mag > 1e-18L) break;
    switch (k % 4) {
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
      default: p += term; break;
    }
    prev = mag;
    if (mag < 1e-19L) {
      converged = true;
      break;
    }
  }
  if (!converged) return false;
  const long double pil = std::numbers::pi_v<long double>;
  const long double omega = static_cast<long double>(x) - (nu / 2.0L + 0.25L) * pil;
  out = static_cast<double>(std::sqrt(2.0L / (pil * x)) * (p * std::cos(omega) - q * std::sin(omega)));
  return true;
}

// Miller's algorithm: backward recurrence in integer steps from a large
// starting index, normalised with
//   (x/2)^a = sum_k (a + 2k) Gamma(a + k) / k! J_{a+2k}(x),   0 < a < 1,
//   1       = J_0 + 2 sum_{k>=1} J_{2k},                       a = 0.
double miller_j(double nu, double x) {
  const int m = static_cast<int>(std::floor(nu));
  double frac = nu - m;
  if (frac < 1e-15) frac = 0.0;
  const double top = std::max(static_cast<double>(m), x);
  int start = static_cast<int>(top + 30.0 + 4.0 * std::sqrt(top + 1.0));
  if (start % 2 != 0) ++start;

  // gamma_ratio[k] = Gamma(frac + k) / k!
  const int kmax = start / 2;
  std::vector<long double> gamma_ratio(static_cast<std::size_t>(kmax) + 1, 0.0L);
  if (frac > 0.0) {
    gamma_ratio[0] = std::tgamma(static_cast<long double>(frac));
    for (int k = 1; k <= kmax; ++k) gamma_ratio[k] = gamma_ratio[k - 1] * (frac + k - 1.0L) / k;
  }

  long double next = 0.0L;
  long double cur = 1e-300L;
  long double wanted = 0.0L;
  long double norm = 0.0L;
  for (int j = start; j >= 0; --j) {
    if (j == m) wanted = cur;
    if (j % 2 == 0) {
      const int k = j / 2;
      const long double c = frac == 0.0 ? (k == 0 ? 1.0L : 2.0L) : (frac + 2.0L * k) * gamma_ratio[k];
      norm += c * cur;
    }
    if (j == 0) break;
    const long double prev = (2.0L * (frac + j) / x) * cur - next;
    next = cur;
    cur = prev;
    if (std::fabs(cur) > 1e250L) {
      cur *= 1e-250L;
      next *= 1e-250L;
      wanted *= 1e-250L;
      norm *= 1e-250L;
    }
  }
  const long double lhs =
      frac == 0.0 ? 1.0L : std::pow(static_cast<long double>(x) / 2.0L, static_cast<long double>(frac));
  return static_cast<double>(wanted * lhs / norm);
}

double legendre_with_derivative(int n, double x, double& deriv) {
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  if (n == 0) {
    deriv = 0.0;
    return 1.0;
  }
  deriv = n * (x * p1 - p0) / (x * x - 1.0);
  return p1;
}

}  // namespace

BesselOrder::BesselOrder(double nu) : nu_(nu) {
  if (!std::isfinite(nu) || nu < 0.0) {
    std::ostringstream msg;
    msg << "Bessel order must be finite and non-negative, got " << nu;
    throw std::domain_error(msg.str());
  }
}

double bessel_j(BesselOrder order, double x) {
  const double nu = order.value();
  if (!(x >= 0.0) || !std::isfinite(x)) {
    std::ostringstream msg;
    msg << "bessel_j: argument must be finite and non-negative, got " << x;
    throw std::domain_error(msg.str());
  }
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (x <= 12.0 || x * x <= 4.0 * (nu + 1.0)) {
    return static_cast<double>(series_j(nu, x));
  }
  if (x >= std::max(30.0, 1.5 * nu * nu)) {
    double out = 0.0;
    if (asymptotic_j(nu, x, out)) return out;
  }
  return miller_j(nu, x);
}

std::vector<double> bessel_zeros(BesselOrder order, int n) {
  if (n < 1) throw std::invalid_argument("bessel_zeros: n must be >= 1");
  const double nu = order.value();
  auto j = [order](double x) { return bessel_j(order, x); };

  auto refine = [&j](double lo, double hi) {
    double flo = j(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = j(mid);
      if (fm == 0.0) return mid;
      if ((fm > 0.0) == (flo > 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  // McMahon: j_{nu,k} ~ beta - (mu - 1) / (8 beta), beta = (k + nu/2 - 1/4) pi.
  auto mcmahon = [nu](int k) {
    const double beta = (k + nu / 2.0 - 0.25) * kPi;
    const double mu = 4.0 * nu * nu;
    return beta - (mu - 1.0) / (8.0 * beta) - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * std::pow(8.0 * beta, 3));
  };

  // Consecutive zeros are more than 3 apart for every nu >= 0, so any
  // interval shorter than that holds at most one zero.
  std::vector<double> zeros;
  zeros.reserve(static_cast<std::size_t>(n));
  constexpr double step = 0.2;
  double x = std::max(nu, 1e-3);  // every positive zero exceeds nu
  double fx = j(x);
  while (static_cast<int>(zeros.size()) < n) {
    const int k = static_cast<int>(zeros.size()) + 1;
    if (k >= 2) {
      const double prev = zeros.back();
      const double guess = mcmahon(k);
      const double lo = guess - 0.5;
      const double hi = guess + 0.5;
      if (guess > 4.0 * nu + 2.0 && lo > prev + 0.1 && lo - prev < 2.9) {
        const double flo = j(lo);
        const double fhi = j(hi);
        const double fafter = j(prev + 0.05);
        if ((flo > 0.0) != (fhi > 0.0) && (fafter > 0.0) == (flo > 0.0)) {
          zeros.push_back(refine(lo, hi));
          x = hi;
          fx = fhi;
          continue;
        }
      }
    }
    const double xn = x + step;
    const double fn = j(xn);
    if ((fx > 0.0) != (fn > 0.0) || fn == 0.0) zeros.push_back(fn == 0.0 ? xn : refine(x, xn));
    x = xn;
    fx = fn;
    if (x > 1e7) throw std::runtime_error("bessel_zeros: failed to bracket zeros");
  }
  return zeros;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  if (!(a < b)) throw std::invalid_argument("gauss_legendre: require a < b");
  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double p = legendre_with_derivative(n, x, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    legendre_with_derivative(n, x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Ascending order: node i from the left is -x.
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = mid;
  return rule;
}

QuadratureRule composite_gauss_legendre(int order, int panels, double a, double b) {
  if (panels < 1) throw std::invalid_argument("composite_gauss_legendre: panels must be >= 1");
  const QuadratureRule unit = gauss_legendre(order, 0.0, 1.0);
  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(static_cast<Eigen::Index>(order) * panels);
  rule.weights.resize(rule.nodes.size());
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double left = a + p * width;
    rule.nodes.segment(p * order, order) = (left + width * unit.nodes.array()).matrix();
    rule.weights.segment(p * order, order) = width * unit.weights;
  }
  return rule;
}

}  // namespace edgeheat
