#include "edgeheat/hankel.hpp"

#include <cmath>

#include "edgeheat/specfun.hpp"

namespace edgeheat {

namespace {

// Newton-Schulz iteration for the matrix sign function; converges
// quadratically to the nearest symmetric involution when X^2 is close to I.
Eigen::MatrixXd project_to_involution(Eigen::MatrixXd x) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < 20; ++it) {
    const Eigen::MatrixXd sq = x * x;
    const double defect = (sq - eye).cwiseAbs().maxCoeff();
    if (defect < 1e-15) break;
    x = 0.5 * x * (3.0 * eye - sq);
    x = 0.5 * (x + x.transpose()).eval();
  }
  return x;
}

}  // namespace

HankelPlan build_plan(double nu, int n, double s_max) {
  if (n < 8) throw std::invalid_argument("build_plan: n must be >= 8");
  if (!(s_max > 0.0)) throw std::invalid_argument("build_plan: s_max must be positive");
  const BesselOrder order(nu);
  const BesselOrder next(nu + 1.0);
  const std::vector<double> zeros = bessel_zeros(order, n + 1);

  HankelPlan plan;
  plan.nu = nu;
  plan.n = n;
  plan.s_max = s_max;
  plan.zero_extent = zeros[n];
  plan.rho_max = zeros[n] / s_max;
  const double extent = zeros[n];
  const double band = plan.rho_max;

  Eigen::VectorXd j(n);
  Eigen::VectorXd jnext(n);
  for (int k = 0; k < n; ++k) {
    j[k] = zeros[k];
    jnext[k] = std::fabs(bessel_j(next, zeros[k]));
  }
  plan.s_nodes = j * (s_max / extent);
  plan.rho_nodes = j / s_max;
  plan.s_weights.resize(n);
  plan.rho_weights.resize(n);
  for (int k = 0; k < n; ++k) {
    plan.s_weights[k] = 2.0 / (band * band * jnext[k] * jnext[k] * plan.s_nodes[k]);
    plan.rho_weights[k] = 2.0 / (s_max * s_max * jnext[k] * jnext[k] * plan.rho_nodes[k]);
  }

  Eigen::MatrixXd raw(n, n);
  for (int k = 0; k < n; ++k) {
    for (int i = k; i < n; ++i) {
      const double v = 2.0 * bessel_j(order, j[k] * j[i] / extent) / (extent * jnext[k] * jnext[i]);
      raw(k, i) = v;
      raw(i, k) = v;
    }
  }
  plan.raw_involution_defect = (raw * raw - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  plan.transform_matrix = project_to_involution(raw);

  const Eigen::VectorXd sw = plan.s_weights.cwiseSqrt();
  const Eigen::VectorXd rw = plan.rho_weights.cwiseSqrt();
  plan.forward_matrix = rw.cwiseInverse().asDiagonal() * plan.transform_matrix * sw.asDiagonal();
  plan.inverse_matrix = sw.cwiseInverse().asDiagonal() * plan.transform_matrix * rw.asDiagonal();
  return plan;
}

double physical_norm(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& u) {
  detail::check_length(plan, u.size(), "physical_norm");
  return std::sqrt((plan.s_weights.array() * u.array().square()).sum());
}

double spectral_norm(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& u) {
  detail::check_length(plan, u.size(), "spectral_norm");
  return std::sqrt((plan.rho_weights.array() * u.array().square()).sum());
}

Eigen::MatrixXd synthesis_matrix(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& s) {
  const BesselOrder order(plan.nu);
  Eigen::MatrixXd m(s.size(), plan.n);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0) throw std::domain_error("synthesis_matrix: points must be non-negative");
    for (int k = 0; k < plan.n; ++k) {
      const double x = s[i] * plan.rho_nodes[k];
      m(i, k) = plan.rho_weights[k] * std::sqrt(x) * bessel_j(order, x);
    }
  }
  return m;
}

Eigen::MatrixXd interpolation_matrix(const HankelPlan& plan, const Eigen::Ref<const Eigen::VectorXd>& s) {
  return synthesis_matrix(plan, s) * plan.forward_matrix;
}

}  // namespace edgeheat
