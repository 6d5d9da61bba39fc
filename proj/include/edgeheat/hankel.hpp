#pragma once

// Quasi-discrete Hankel transform of order nu on a Bessel-zero grid, in the
// symmetrised convention (H u)(rho) = int sqrt(s rho) J_nu(s rho) u(s) ds,
// which is a self-inverse isometry of L^2(0, inf) and turns
// -d^2/ds^2 + (nu^2 - 1/4)/s^2 into multiplication by rho^2.

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace edgeheat {

struct HankelPlan {
  double nu = 0.0;
  int n = 0;
  double s_max = 0.0;
  double rho_max = 0.0;  // j_{nu,n+1} / s_max
  double zero_extent = 0.0;  // j_{nu,n+1}
  Eigen::VectorXd s_nodes;     // j_{nu,k} s_max / j_{nu,n+1}
  Eigen::VectorXd rho_nodes;   // j_{nu,k} / s_max
  Eigen::VectorXd s_weights;   // quadrature weights for int (.) ds on s_nodes
  Eigen::VectorXd rho_weights; // quadrature weights for int (.) drho on rho_nodes
  // Symmetric orthogonal involution acting on weight-normalised vectors
  // sqrt(w) * u. The raw Bessel-zero matrix is orthogonal only to ~1e-7; it
  // is projected onto the nearest involution (matrix sign iteration).
  Eigen::MatrixXd transform_matrix;
  Eigen::MatrixXd forward_matrix;  // samples on s_nodes -> samples on rho_nodes
  Eigen::MatrixXd inverse_matrix;  // samples on rho_nodes -> samples on s_nodes
  double raw_involution_defect = 0.0;  // max |C_raw^2 - I| before projection

  Eigen::Index size() const { return n; }
};

HankelPlan build_plan(double nu, int n, double s_max);

namespace detail {
inline void check_length(const HankelPlan& plan, Eigen::Index rows, const char* what) {
  if (rows != plan.n) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(plan.n) + " samples, got " +
                                std::to_string(rows));
  }
}
}  // namespace detail

/// Physical samples (columns) to spectral samples.
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> forward(const HankelPlan& plan,
                                                                         const Eigen::MatrixBase<Derived>& u) {
  detail::check_length(plan, u.rows(), "hankel forward");
  return plan.forward_matrix * u;
}

/// Spectral samples (columns) to physical samples.
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> inverse(const HankelPlan& plan,
                                                                         const Eigen::MatrixBase<Derived>& u) {
  detail::check_length(plan, u.rows(), "hankel inverse");
  return plan.inverse_matrix * u;
}

/// Discrete L^2(ds) norm of physical samples.
double physical_norm(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& u);
/// Discrete L^2(drho) norm of spectral samples.
double spectral_norm(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& u);

/// Maps spectral samples to the band-limited physical profile
///   u(s) = sum_k w_k U_k sqrt(s rho_k) J_nu(s rho_k)
/// at arbitrary points s >= 0.
Eigen::MatrixXd synthesis_matrix(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& s);

/// synthesis_matrix(plan, s) * forward_matrix: interpolates physical samples
/// on the plan grid to arbitrary points.
Eigen::MatrixXd interpolation_matrix(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& s);

}  // namespace edgeheat
