#pragma once

// Mild solutions of the Cahn-Hilliard equation u_t = -Delta^2 u + Delta(u - u^3)
// (Delta >= 0 the Friedrichs Laplacian) as fixed points of the Duhamel map
//   F(u)(t) = e^{-t Delta^2} u0 + int_0^t e^{-(t-s) Delta^2} Q(u(s)) ds,
// Q(u) = Delta(u - u^3), found by Picard iteration on a short interval.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgeheat/semigroup.hpp"

namespace edgeheat {

enum class Nonlinearity {
  CahnHilliard,  // Q(u) = Delta(u - u^3)
  Linear,        // Q(u) = Delta u
  None,          // Q = 0
};

struct SolverConfig {
  double T = 0.05;
  int n_time = 50;
  double picard_tol = 1e-10;
  int picard_max = 60;
  double contraction_threshold = 0.9;
  int halving_max = 6;
  Nonlinearity nonlinearity = Nonlinearity::CahnHilliard;

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<EdgeField> fields;  // phi-rescaled; fields[0] is u0
  std::vector<double> update_norms;
  std::vector<double> contraction;  // successive update-norm ratios
  bool converged = false;
  int iterations = 0;
  double T = 0.0;
  int halvings = 0;
  std::string message;

  double max_contraction() const;
};

/// Delta(u - u^3) (or the selected nonlinearity) for a geometric field; the
/// cube is formed on the fiber quadrature grid and projected back onto the
/// retained modes. Throws AliasingError below the de-aliasing resolution.
EdgeField apply_Q(const EdgeField& u, Nonlinearity kind = Nonlinearity::CahnHilliard);

/// One application of F on the trajectory's time nodes, with the semigroup
/// factor integrated exactly against piecewise-linear Q per spectral mode.
Trajectory duhamel_map(const Trajectory& u, const EdgeField& u0, Nonlinearity kind = Nonlinearity::CahnHilliard);

/// Trajectory with every node equal to e^{-t Delta^2} u0 on a uniform grid.
Trajectory free_trajectory(const EdgeField& u0, double T, int n_time);

/// Picard iteration from the free trajectory; halves T when the contraction
/// factor exceeds the threshold or the iteration budget runs out.
Trajectory picard_solve(const EdgeField& u0, const SolverConfig& cfg);

/// Consecutive picard_solve runs of length cfg.T covering [0, T_total].
Trajectory march(const EdgeField& u0, double T_total, const SolverConfig& cfg);

/// Largest node-wise sup difference between two trajectories.
double trajectory_distance(const Trajectory& a, const Trajectory& b);

struct TipFit {
  std::size_t component = 0;
  int entry = 0;
  int copy = 0;
  bool fitted = false;
  double gamma = 0.0;
  double expected = 0.0;  // nearest index-set exponent generated by this mode
  bool log_flag = false;
  bool matches = false;   // |gamma - expected| <= 0.05
  std::string message;
};

struct Diagnostics {
  std::vector<double> mass;
  double mass_drift = 0.0;  // max |M(t) - M(0)| / |M(0)| (absolute if M(0) = 0)
  std::vector<double> energy;
  double max_energy_increase = 0.0;
  bool energy_monotone = true;  // every step increase <= 1e-8
  std::vector<TipFit> tip_fits;
};

/// E(u) = int |grad u|^2 / 2 + (W(u) - W(far field)) dvol, W(u) = (1 - u^2)^2 / 4.
double energy(const EdgeField& u);

/// Leading tip exponent of each nonzero component of u (geometric profile,
/// the constant mode with its tip value removed), against the index set.
std::vector<TipFit> tip_exponents(const EdgeField& u);

Diagnostics diagnostics(const Trajectory& traj);

/// One CSV per time node plus a JSON manifest with the run history.
std::filesystem::path write_trajectory(const Trajectory& traj, const Diagnostics& diag,
                                       const std::filesystem::path& dir, const std::string& stem);

}  // namespace edgeheat
