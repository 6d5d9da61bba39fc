#pragma once

// Biharmonic heat kernels of the Friedrichs bi-Laplacian on model cones and
// edges, per fiber mode and in the Phi-rescaled convention:
//
//   k_nu(t, s, s~) = int_0^inf sqrt(s s~) J_nu(s rho) J_nu(s~ rho) rho m(rho) drho,
//
// with m(rho) = exp(-t rho^4) on the cone; on an edge of dimension b the
// multiplier is replaced by its partial inverse Fourier transform along the
// edge at separation r = |y - y~|. The geometric kernel is
// (s s~)^{-f/2} sum_sigma k_{nu(sigma)} phi_sigma(z) phi_sigma(z~).

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgeheat/geometry.hpp"
#include "edgeheat/specfun.hpp"

namespace edgeheat {

/// Smallest time accepted for tabulation. Below it the near-diagonal kernel
/// is narrower than the default radial grid can resolve.
inline constexpr double kMinTabulationTime = 1e-4;
/// t * rho_cut^4: exp(-46) ~ 1e-20 at the spectral cutoff.
inline constexpr double kCutoffExponent = 46.0;

using RadialMultiplier = std::function<double(double rho)>;

struct ModeKernelSpec {
  double nu = 0.0;
  int b = 0;
  double t = 0.0;
  double rho_cut = 0.0;
  int panels = 0;
  double panel_width = 0.0;
};

/// Cutoff and panel layout resolving the oscillation of J_nu(s rho) for all
/// s <= s_extent (panel width <= pi / (2 max(s_extent, 1))).
ModeKernelSpec make_kernel_spec(double nu, int b, double t, double s_extent);

/// Panelled Gauss-Legendre rule on [0, rho_cut] (12 nodes per panel).
QuadratureRule spectral_rule(const ModeKernelSpec& spec);

/// Cone mode kernel (b = 0).
double cone_mode_kernel(double nu, double t, double s, double s_tilde);

/// The same Hankel integral with an arbitrary multiplier decaying before
/// rho_cut; panel width follows max(s, s~).
double mode_integral(double nu, double s, double s_tilde, const RadialMultiplier& m, double rho_cut);

/// (2 pi)^{-b} int_{R^b} exp(i xi . y) exp(-t (rho^2 + |xi|^2)^2) dxi at |y| = r:
/// a cosine quadrature for b = 1 and the radial Fourier reduction
/// (2 pi)^{-b/2} r^{1-b/2} int J_{b/2-1}(r q) q^{b/2} (...) dq for b >= 2.
double edge_multiplier(int b, double t, double rho, double r);

/// Edge mode kernel at separation r along the edge (b >= 1).
double edge_mode_kernel(double nu, int b, double t, double s, double s_tilde, double r);

/// Full geometric kernel H(t, (s, z), (s~, z~)) on a cone (b = 0), summed over
/// the retained fiber modes.
double geometric_cone_kernel(const EdgeGeometry& geom, double t, double s, std::span<const double> z, double s_tilde,
                             std::span<const double> z_tilde);

enum class KernelPath { Quadrature, Spectral };
enum class KernelConvention { Rescaled, Geometric };

struct ModeTable {
  int entry = 0;
  double sigma_sq = 0.0;
  double nu = 0.0;
  int multiplicity = 1;
  Eigen::VectorXd nodes;    // radial grid (Bessel-zero grid of order nu)
  Eigen::VectorXd weights;  // ds-weights for composing kernels on this grid
  Eigen::MatrixXd values;   // Phi-rescaled k_nu(t, s_i, s_j)
};

/// Per-mode kernel matrices. Values are stored Phi-rescaled; geometric values
/// follow from (s s~)^{-f/2}.
struct KernelTable {
  EdgeGeometry geometry;
  double t = 0.0;
  double r = 0.0;  // edge separation (b >= 1)
  int n = 0;
  KernelPath path = KernelPath::Quadrature;
  KernelConvention convention = KernelConvention::Rescaled;
  std::vector<ModeTable> modes;

  Eigen::MatrixXd geometric(std::size_t mode) const;
};

/// Tabulates every retained fiber eigenvalue on its own n-point Hankel grid,
/// either by direct quadrature or as the inverse Hankel transform of the
/// diagonal multiplier.
KernelTable assemble_table(const EdgeGeometry& geom, double t, int n, KernelPath path = KernelPath::Quadrature,
                           double r = 0.0);

/// sup-relative difference of two tables over interior nodes s <= frac * s_max.
double table_difference(const KernelTable& a, const KernelTable& b, double interior_fraction = 0.5);

/// max over modes of sup|K(t1+t2) - K(t1) W K(t2)| / sup|K(t1+t2)| over
/// interior nodes s <= s_max/2 (the composition itself runs over the full grid).
double check_semigroup(const KernelTable& t1, const KernelTable& t2, const KernelTable& t12);

/// Edge version (b >= 1): tables at a fixed separation r do not compose, so
/// K(t1+t2; r=0) is compared with the composition integrated over r in R^b,
/// |S^{b-1}| int_0^R r^{b-1} K(t1; r) W K(t2; r) dr, R = 14 max(t1, t2)^{1/4}.
double check_edge_semigroup(const EdgeGeometry& geom, double t1, double t2, int n, int panels = 24);

struct CompletenessReport {
  double t = 0.0;
  double residual = 0.0;    // sup_p |int H dvol - 1|
  double tail_bound = 0.0;  // estimate of the mass beyond s_max
  bool tail_ok = true;
  Eigen::VectorXd points;
  Eigen::VectorXd integrals;
};

/// Integrates the geometric kernel against the volume form (radially up to
/// s_max) at n_points points spread over [s_lo, s_hi]. Only the zero mode
/// contributes; the edge directions integrate out to the cone case.
CompletenessReport check_stochastic_completeness(const EdgeGeometry& geom, double t, int n_points, double s_lo = 0.2,
                                                 double s_hi = 2.0);

class ExponentFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExponentFit {
  double gamma = 0.0;
  double intercept = 0.0;
  bool log_flag = false;
  double residual_power = 0.0;  // rms residual of log|v| = gamma log s + c
  double residual_log = 0.0;    // rms residual of log|v| = gamma log s + log|log s| + c
};

/// Least-squares leading exponent of v ~ s^gamma (or s^gamma log s) as s -> 0.
/// Requires >= 5 samples spanning >= 1.5 decades with v of one sign.
ExponentFit fit_leading_exponent(const Eigen::Ref<const Eigen::VectorXd>& s,
                                 const Eigen::Ref<const Eigen::VectorXd>& v);

/// One CSV per mode (header: s nodes of the second argument) and a JSON
/// manifest; returns the manifest path.
std::filesystem::path export_table(const KernelTable& table, const std::filesystem::path& dir,
                                   const std::string& stem = "kernel");

}  // namespace edgeheat
