#pragma once

// Brute-force ground truth for one radial mode: a finite-volume
// discretisation of l_nu = -d^2/ds^2 + (nu^2 - 1/4)/s^2, its dense
// eigendecomposition, the resulting biharmonic heat kernel, and a
// method-of-lines Cahn-Hilliard solver for fibrewise-constant data.
//
// Writing v = s^{nu+1/2} g turns l_nu into the radial Laplacian
// -s^{-(2nu+1)} (s^{2nu+1} g')' of "dimension" 2nu+2. Cells [(i-1)h, ih]
// carry the mass M_i = int s^{2nu+1} ds; the tip face has zero flux (the
// Friedrichs condition) and the outer face is Dirichlet.

#include <Eigen/Dense>

namespace edgeheat {

struct FDOperator {
  double nu = 0.0;
  int n = 0;
  double s_max = 0.0;
  double h = 0.0;
  Eigen::VectorXd nodes;    // cell centres (i - 1/2) h
  Eigen::VectorXd mass;     // M_i
  Eigen::VectorXd scale;    // c_i = s_i^{nu+1/2} / sqrt(M_i)
  Eigen::VectorXd weights;  // 1 / c_i^2, the ds-quadrature weight of node i
  Eigen::MatrixXd matrix;   // M^{-1/2} K M^{-1/2}, symmetric tridiagonal
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

/// n cells on [0, s_max]; n >= 64 and n <= 4096.
FDOperator build_fd(double nu, int n, double s_max);

/// Phi-rescaled kernel k_ij of e^{-t l^2}: v(t)_i = sum_j k_ij v0_j weights_j.
Eigen::MatrixXd fd_biharmonic_kernel(const FDOperator& op, double t);

struct FDSolveResult {
  Eigen::VectorXd values;  // geometric radial samples at T (far field included)
  int steps = 0;
  double step_change = 0.0;  // sup change from the last step doubling
  bool converged = false;
};

/// Zero-mode Cahn-Hilliard u_t = -A^2 u + A(u - u^3) (or the linear flow
/// with `cubic` off) for u = far_field + w, w0 sampled at op.nodes. The
/// linear part is integrated exactly in the eigenbasis, the rest by the
/// exponential midpoint rule; steps double from `steps` until successive
/// answers differ by less than `tol` in sup.
FDSolveResult fd_ch_solve(const FDOperator& op, const Eigen::VectorXd& w0, double far_field, double T, int steps,
                          bool cubic = true, double tol = 1e-4, int max_doublings = 12);

}  // namespace edgeheat
