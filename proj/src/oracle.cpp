#include "edgeheat/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace edgeheat {

namespace {

Eigen::ArrayXd phi1(const Eigen::ArrayXd& z) {
  return z.unaryExpr([](double x) { return x == 0.0 ? 1.0 : -std::expm1(-x) / x; });
}

}  // namespace

FDOperator build_fd(double nu, int n, double s_max) {
  if (!(nu >= 0.0)) throw std::invalid_argument("build_fd: nu must be >= 0");
  if (n < 64 || n > 4096) throw std::invalid_argument("build_fd: need 64 <= n <= 4096");
  if (!(s_max > 0.0)) throw std::invalid_argument("build_fd: s_max must be positive");
  FDOperator op;
  op.nu = nu;
  op.n = n;
  op.s_max = s_max;
  op.h = s_max / n;
  const double p = 2.0 * nu + 2.0;
  const double h = op.h;
  op.nodes.resize(n);
  op.mass.resize(n);
  for (int i = 0; i < n; ++i) {
    op.nodes[i] = (i + 0.5) * h;
    op.mass[i] = std::pow(h, p) * (std::pow(i + 1.0, p) - std::pow(double(i), p)) / p;
  }
  // Face conductances s^{2nu+1}/h at s = ih; face 0 (the tip) carries no flux.
  auto face = [&](int i) { return std::pow(i * h, 2.0 * nu + 1.0) / h; };
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      K(i, i) += face(i);
      K(i, i - 1) -= face(i);
    }
    if (i + 1 < n) {
      K(i, i) += face(i + 1);
      K(i, i + 1) -= face(i + 1);
    } else {
      K(i, i) += 2.0 * face(n);  // ghost value -g_n: zero at s_max
    }
  }
  const Eigen::VectorXd inv_sqrt_m = op.mass.cwiseSqrt().cwiseInverse();
  op.matrix = inv_sqrt_m.asDiagonal() * K * inv_sqrt_m.asDiagonal();
  op.matrix = 0.5 * (op.matrix + op.matrix.transpose()).eval();
  op.scale = op.nodes.array().pow(nu + 0.5).matrix().cwiseProduct(inv_sqrt_m);
  op.weights = op.scale.cwiseAbs2().cwiseInverse();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.matrix);
  if (eig.info() != Eigen::Success) throw std::runtime_error("build_fd: eigendecomposition failed");
  op.eigenvalues = eig.eigenvalues();
  op.eigenvectors = eig.eigenvectors();
  return op;
}

Eigen::MatrixXd fd_biharmonic_kernel(const FDOperator& op, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fd_biharmonic_kernel: t must be positive");
  const Eigen::VectorXd decay = (-t * op.eigenvalues.array().square()).exp();
  const Eigen::MatrixXd core = op.eigenvectors * decay.asDiagonal() * op.eigenvectors.transpose();
  return op.scale.asDiagonal() * core * op.scale.asDiagonal();
}

FDSolveResult fd_ch_solve(const FDOperator& op, const Eigen::VectorXd& w0, double far_field, double T, int steps,
                          bool cubic, double tol, int max_doublings) {
  if (w0.size() != op.n) throw std::invalid_argument("fd_ch_solve: w0 length does not match the grid");
  if (!(T > 0.0) || steps < 1) throw std::invalid_argument("fd_ch_solve: need T > 0 and steps >= 1");
  const double c = far_field;
  const Eigen::ArrayXd lam = op.eigenvalues.array();
  // u - u^3 about the far field: (1 - 3c^2) w goes into the exact linear part.
  const Eigen::ArrayXd L = lam.square() - (1.0 - 3.0 * c * c) * lam;
  const Eigen::MatrixXd& V = op.eigenvectors;
  const Eigen::VectorXd sqrt_m = op.mass.cwiseSqrt();

  auto to_eig = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return V.transpose() * sqrt_m.cwiseProduct(w); };
  auto from_eig = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return (V * y).cwiseQuotient(sqrt_m); };
  auto rest = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    if (!cubic) return Eigen::VectorXd::Zero(y.size());
    const Eigen::ArrayXd w = from_eig(y).array();
    const Eigen::VectorXd r = (-3.0 * c * w.square() - w.cube()).matrix();
    return (lam * to_eig(r).array()).matrix();
  };
  auto solve = [&](int m) {
    const double h = T / m;
    const Eigen::ArrayXd e_full = (-h * L).exp(), e_half = (-0.5 * h * L).exp();
    const Eigen::ArrayXd p_full = h * phi1(h * L), p_half = 0.5 * h * phi1(0.5 * h * L);
    Eigen::VectorXd y = to_eig(w0);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd mid = (e_half * y.array() + p_half * rest(y).array()).matrix();
      y = (e_full * y.array() + p_full * rest(mid).array()).matrix();
    }
    return from_eig(y);
  };

  FDSolveResult result;
  Eigen::VectorXd prev = solve(steps);
  for (int d = 0; d < max_doublings; ++d) {
    steps *= 2;
    Eigen::VectorXd next = solve(steps);
    result.step_change = (next - prev).cwiseAbs().maxCoeff();
    prev = std::move(next);
    if (result.step_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.steps = steps;
  result.values = prev.array() + c;
  return result;
}

}  // namespace edgeheat
