#pragma once

// Model edges R^b x C(F) over a rescaled circle or round sphere: fiber
// spectra, indicial roots, the tip index set, and admissibility.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace edgeheat {

enum class FiberKind { Circle, Sphere };

/// Value of the `copy`-th orthonormal eigenfunction of one eigenvalue at a
/// fiber point z (angle for the circle, (theta, phi) for the 2-sphere).
using FiberEigenfunction = std::function<double(std::span<const double> z, int copy)>;
/// Coordinate partial derivatives of the same eigenfunction, written to `grad`.
using FiberGradient = std::function<void(std::span<const double> z, int copy, std::span<double> grad)>;
/// Coordinate second derivatives, row-major f x f, written to `hess`.
using FiberHessian = std::function<void(std::span<const double> z, int copy, std::span<double> hess)>;

struct FiberMode {
  double sigma_sq = 0.0;  // eigenvalue of the fiber Laplacian
  int multiplicity = 1;
  int label = 0;  // k for the circle, l for the sphere
  FiberEigenfunction eigenfunction;
  FiberGradient gradient;
  FiberHessian hessian;
};

/// Quadrature over the fiber with respect to its (rescaled) volume form.
struct FiberQuadrature {
  Eigen::MatrixXd points;   // fiber_dim x count
  Eigen::VectorXd weights;  // sums to the fiber volume
  Eigen::Index size() const { return weights.size(); }
};

struct FiberSpectrum {
  FiberKind kind = FiberKind::Circle;
  int fiber_dim = 1;
  double cone_scale = 1.0;
  int max_mode = 0;
  std::vector<FiberMode> entries;  // ascending sigma_sq, entries[0] is the constant mode
  std::string description;

  bool has_eigenfunctions() const;
  double volume() const;
  /// Smallest rule that integrates products of four retained eigenfunctions
  /// exactly (de-aliasing for a cubic nonlinearity projected back onto the
  /// retained modes).
  FiberQuadrature dealiasing_quadrature() const;
  /// Rule with at least `resolution` points per angular direction.
  FiberQuadrature quadrature(int resolution) const;
  /// Mode resolution a quadrature must reach to de-alias a cubic.
  int required_resolution() const;
};

/// Circle of length 2 pi c: eigenvalues (k/c)^2, k = 0..max_mode.
FiberSpectrum circle_fiber(int max_mode, double cone_scale);

/// Round sphere S^f of radius c: eigenvalues l(l+f-1)/c^2. Eigenfunctions are
/// provided for f = 2 only; higher f yields a spectrum-only description.
FiberSpectrum sphere_fiber(int fiber_dim, int max_degree, double cone_scale);

struct EdgeGeometry {
  int b = 0;
  FiberSpectrum fiber;
  double s_max = 10.0;

  int fiber_dim() const { return fiber.fiber_dim; }
  int total_dim() const { return 1 + b + fiber.fiber_dim; }
};

EdgeGeometry make_geometry(int b, FiberSpectrum fiber, double s_max);

/// sqrt(sigma^2 + (f-1)^2/4).
double nu_of_sigma(double sigma_sq, int fiber_dim);

struct IndicialRoots {
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  bool logarithmic = false;  // nu = 0: the second solution is sqrt(s) log s
};

IndicialRoots indicial_roots(double nu);

struct IndexSource {
  double sigma_sq = 0.0;
  int shift = 0;  // j in gamma + 2j
};

struct IndexEntry {
  double gamma = 0.0;
  std::vector<IndexSource> sources;
};

struct IndexSet {
  std::vector<IndexEntry> entries;  // ascending, deduplicated to 1e-9

  std::vector<double> exponents() const;
  bool contains(double gamma, double tol = 1e-9) const;
};

/// Tip exponents -(f-1)/2 + nu(sigma) + 2j strictly below `cutoff`.
IndexSet index_set(const EdgeGeometry& geom, double cutoff);

struct AdmissibilityReport {
  bool feasible = true;          // product models are always feasible
  bool admissible_ii = true;     // the metric perturbation vanishes identically
  std::optional<bool> admissible_i;  // empty when the spectrum holds no nonzero eigenvalue
  double lambda0 = 0.0;
  std::string note;
};

AdmissibilityReport check_admissible(const EdgeGeometry& geom);

}  // namespace edgeheat
