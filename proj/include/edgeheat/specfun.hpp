#pragma once

// Bessel functions of the first kind, their zeros, and Gauss-Legendre rules.

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace edgeheat {

/// Order of a Bessel function of the first kind. Finite and non-negative.
class BesselOrder {
 public:
  explicit BesselOrder(double nu);
  double value() const { return nu_; }
  operator double() const { return nu_; }

 private:
  double nu_;
};

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  double a = 0.0;
  double b = 0.0;

  Eigen::Index size() const { return nodes.size(); }

  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
    return sum;
  }
};

/// J_nu(x) for nu >= 0, x >= 0.
///
/// Three regimes: the power series (accumulated in long double) for small
/// arguments, the Hankel asymptotic expansion once x dominates nu^2, and
/// Miller's backward recurrence with the Neumann-sum normalisation in between.
/// Absolute error is below 1e-12 for x <= 50 and relative to the envelope
/// sqrt(2 / (pi x)) below 1e-10 beyond.
double bessel_j(BesselOrder nu, double x);

/// First n positive zeros of J_nu, ascending, located to 1e-12 absolute.
std::vector<double> bessel_zeros(BesselOrder nu, int n);

/// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes each.
QuadratureRule composite_gauss_legendre(int order, int panels, double a, double b);

}  // namespace edgeheat
