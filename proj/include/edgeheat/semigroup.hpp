#pragma once

// Edge fields and the functional calculus of the Friedrichs Laplacian on a
// model cone (b = 0) or edge (b = 1, periodic along the edge):
// e^{-t Delta^2} and Delta act per fiber mode as the multipliers
// exp(-t (rho^2 + xi^2)^2) and rho^2 + xi^2 after a Hankel transform in s and
// a Fourier transform in y. Also the weighted sup norms built from the edge
// vector fields s d_s, s d_y, d_z.

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgeheat/geometry.hpp"
#include "edgeheat/hankel.hpp"

namespace edgeheat {

/// Phi-rescaled (u -> s^{f/2} u, radial measure ds) or geometric (s^f ds).
enum class Convention { Rescaled, Geometric };

class ConventionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The cubic nonlinearity needs a fiber grid fine enough to integrate
/// products of four retained eigenfunctions.
class AliasingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One (eigenvalue, copy) pair of the fiber spectrum.
struct Component {
  int entry = 0;
  int copy = 0;
};

/// Grids, transforms and evaluation matrices shared by all fields on one
/// geometry. Immutable after construction.
class Discretization {
 public:
  /// n radial nodes per mode; for b = 1 the edge is a circle of length
  /// edge_length sampled at n_edge points. fiber_resolution = 0 selects the
  /// de-aliasing fiber quadrature.
  Discretization(EdgeGeometry geom, int n, double edge_length = 0.0, int n_edge = 1, int fiber_resolution = 0);

  const EdgeGeometry& geometry() const { return geom_; }
  int n() const { return n_; }
  int n_edge() const { return n_edge_; }
  double edge_length() const { return edge_length_; }
  /// Measure of one edge sample (1 when b = 0).
  double edge_weight() const { return b() == 0 ? 1.0 : edge_length_ / n_edge_; }
  int b() const { return geom_.b; }
  int fiber_dim() const { return geom_.fiber_dim(); }

  std::size_t entry_count() const { return plans_.size(); }
  const HankelPlan& plan(std::size_t entry) const { return plans_.at(entry); }
  std::size_t component_count() const { return components_.size(); }
  const Component& component(std::size_t c) const { return components_.at(c); }
  const HankelPlan& component_plan(std::size_t c) const { return plans_.at(components_.at(c).entry); }

  const Eigen::VectorXd& edge_nodes() const { return edge_nodes_; }
  /// Orthonormal real Fourier basis on the edge samples (columns), with the
  /// matching wavenumbers.
  const Eigen::MatrixXd& edge_basis() const { return edge_basis_; }
  const Eigen::VectorXd& edge_wavenumbers() const { return edge_xi_; }

  /// rho^2 + xi^2 on the (rho_k, xi_m) grid of one entry.
  Eigen::MatrixXd symbol(std::size_t entry) const;

  bool has_fiber_grid() const { return fiber_quad_.size() > 0; }
  int fiber_resolution() const { return fiber_resolution_; }
  const FiberQuadrature& fiber_quadrature() const { return fiber_quad_; }
  /// phi_c(z_q): component x quadrature point.
  const Eigen::MatrixXd& fiber_values() const { return fiber_values_; }

  /// Interpolates rescaled samples of entry `from` to the nodes of entry `to`.
  const Eigen::MatrixXd& transfer(std::size_t from, std::size_t to) const;

  /// Sup norms are taken over the first norm_count() radial nodes of the
  /// constant mode (s <= 0.75 s_max); the outer quarter is the truncation
  /// boundary layer.
  Eigen::Index norm_count() const { return norm_count_; }
  /// Centred (one-sided at the ends) second-order d/ds on the constant-mode
  /// nodes.
  const Eigen::MatrixXd& radial_difference() const { return radial_diff_; }
  /// Right-multiplier taking edge samples to their y-derivative.
  const Eigen::MatrixXd& edge_difference() const { return edge_diff_; }
  /// Row of edge basis functions evaluated at an arbitrary y.
  Eigen::RowVectorXd edge_basis_at(double y) const;

 private:
  EdgeGeometry geom_;
  int n_;
  int n_edge_;
  double edge_length_;
  int fiber_resolution_ = 0;
  std::vector<HankelPlan> plans_;
  std::vector<Component> components_;
  Eigen::VectorXd edge_nodes_;
  Eigen::MatrixXd edge_basis_;
  Eigen::VectorXd edge_xi_;
  FiberQuadrature fiber_quad_;
  Eigen::MatrixXd fiber_values_;
  std::vector<Eigen::MatrixXd> transfer_;  // from * entries + to
  Eigen::Index norm_count_ = 0;
  Eigen::MatrixXd radial_diff_;
  Eigen::MatrixXd edge_diff_;
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;

DiscretizationPtr make_discretization(EdgeGeometry geom, int n, double edge_length = 0.0, int n_edge = 1,
                                      int fiber_resolution = 0);

/// A function on the model edge: a far-field constant (geometric value at
/// s -> inf) plus decaying fiber-mode profiles. components[c] holds nodal
/// values on the radial grid of its entry (rows) times the edge samples
/// (columns), in the field's convention.
struct EdgeField {
  DiscretizationPtr disc;
  Convention convention = Convention::Rescaled;
  double far_field = 0.0;
  std::vector<Eigen::MatrixXd> components;
};

EdgeField zero_field(const DiscretizationPtr& disc, Convention convention = Convention::Rescaled);
/// The exact constant: far field c, no decaying part.
EdgeField constant_field(const DiscretizationPtr& disc, double c, Convention convention = Convention::Rescaled);

/// Geometric function of (s, z, y); the part minus `far_field` is projected
/// onto the retained fiber modes with the fiber quadrature.
using PointFunction = std::function<double(double s, std::span<const double> z, double y)>;
EdgeField project_function(const DiscretizationPtr& disc, const PointFunction& fn, double far_field = 0.0,
                           Convention convention = Convention::Rescaled);

/// Geometric radial profile g(s, y) placed in one component:
/// u = g(s, y) phi_c(z).
using ProfileFunction = std::function<double(double s, double y)>;
EdgeField mode_field(const DiscretizationPtr& disc, std::size_t component, const ProfileFunction& profile,
                     Convention convention = Convention::Rescaled);

/// Fibrewise-constant field u(s, z, y) = g(s, y) (constant-mode component
/// g sqrt(vol)).
EdgeField radial_field(const DiscretizationPtr& disc, const ProfileFunction& profile,
                       Convention convention = Convention::Rescaled);

EdgeField to_rescaled(const EdgeField& u);
EdgeField to_geometric(const EdgeField& u);
EdgeField with_convention(const EdgeField& u, Convention convention);

EdgeField operator+(const EdgeField& a, const EdgeField& b);
EdgeField operator-(const EdgeField& a, const EdgeField& b);
EdgeField operator*(double alpha, const EdgeField& a);

/// Spectral coefficients (Hankel in s, Fourier in y) of each component.
std::vector<Eigen::MatrixXd> to_spectral(const EdgeField& u);
/// Rebuilds a rescaled field from spectral coefficients.
EdgeField from_spectral(const DiscretizationPtr& disc, const std::vector<Eigen::MatrixXd>& spec, double far_field);

/// Multiplies every component by m(rho^2 + xi^2) in spectral space.
EdgeField apply_symbol(const EdgeField& u, const std::function<double(double)>& m, bool keep_far_field);

/// e^{-t Delta^2} u; either convention, returned in the input convention.
EdgeField apply_biharmonic_heat(const EdgeField& u, double t);
/// Delta u for a rescaled field (the constant far field is annihilated).
EdgeField apply_laplacian(const EdgeField& u);

/// int (u - far field) dvol over the truncated model.
double mass(const EdgeField& u);
/// Discrete L^2 norm of the decaying part.
double l2_norm(const EdgeField& u);
/// max over components and nodes of |geometric nodal value|.
double nodal_sup(const EdgeField& u);

/// Band-limited geometric value at an arbitrary point.
double evaluate(const EdgeField& u, double s, std::span<const double> z, double y = 0.0);
/// Geometric profile of one component at radii s (edge sample `edge_index`).
Eigen::VectorXd component_profile(const EdgeField& u, std::size_t component, const Eigen::VectorXd& s,
                                  int edge_index = 0);
/// lim_{s->0} of the geometric profile of one component (nonzero only when
/// the mode's leading exponent vanishes, i.e. the fibrewise constant mode).
double tip_value(const EdgeField& u, std::size_t component, int edge_index = 0);

/// Largest geometric value of the non-constant fiber modes at the probe
/// radius; a field is continuous-ie when this stays below 1e-8.
double tip_defect(const EdgeField& u, double s_probe = 1e-12);
bool is_continuous_ie(const EdgeField& u, double tol = 1e-8);

/// CSV of (component, entry, copy, s, y, value) with a JSON sidecar holding
/// geometry, grid, convention, far field and tags. Returns the CSV path.
std::filesystem::path write_field(const EdgeField& u, const std::filesystem::path& dir, const std::string& stem);
EdgeField read_field(const DiscretizationPtr& disc, const std::filesystem::path& csv_path);

// --- norms -------------------------------------------------------------

/// Derivative sets: D0 = {Delta}; D = {s^{-1} V : V edge vector field};
/// Dprime = {Delta} u {V W} u {V}.
enum class DerivativeSet { D0, D, Dprime };

/// Single operators whose sup norms can be tracked in time.
enum class Derivative {
  Identity,
  Laplacian,
  RadialVector,    // s d_s
  EdgeVector,      // s d_y
  FiberVector,     // d_z (largest over coordinates)
  WeightedRadial,  // s^{-1} (s d_s) = d_s
  WeightedEdge,    // d_y
  WeightedFiber,   // s^{-1} d_z
};

struct NormTerm {
  std::string name;
  double value = 0.0;
};

struct NormReport {
  double sup_norm = 0.0;
  std::vector<NormTerm> terms;
  double total = 0.0;  // sup_norm + sum of terms
  int k = 0;
  DerivativeSet set = DerivativeSet::D0;
};

/// ||u||_{2k} = ||u||_inf + sum_{j<k} sum_{X in set} ||X Delta^j u||_inf on the
/// norm grid (s <= 0.75 s_max, fiber quadrature points, edge samples).
/// Radial derivatives are centred differences, edge derivatives are
/// spectral, fiber derivatives use the eigenfunction derivatives.
NormReport norm_2k(const EdgeField& u, int k, DerivativeSet set);

double sup_derivative(const EdgeField& u, Derivative d);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool monotone = true;
  std::string warning;
  std::vector<double> times;
  std::vector<double> values;
};

/// Slope of log sup|d e^{-t Delta^2} u0| against log t.
DecayFit decay_exponent(const EdgeField& u0, Derivative d, const std::vector<double>& times);

struct ContinuityRow {
  double t = 0.0;
  double difference = 0.0;  // ||e^{-t Delta^2} u0 - u0||_{2k}
};

std::vector<ContinuityRow> strong_continuity_check(const EdgeField& u0, int k, const std::vector<double>& times,
                                                   DerivativeSet set = DerivativeSet::Dprime);

}  // namespace edgeheat
