#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "edgeheat/hankel.hpp"
#include "edgeheat/specfun.hpp"
#include "oracles.hpp"

using namespace edgeheat;

namespace {

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST_CASE("plan is a symmetric involution") {
  const HankelPlan p = build_plan(0.0, 64, 10.0);
  CHECK((p.transform_matrix - p.transform_matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  std::mt19937_64 rng(1);
  for (double nu : {0.0, 0.5, 1.0, 2.5}) {
    const HankelPlan q = build_plan(nu, 128, 10.0);
    const Eigen::VectorXd u = random_vector(128, rng);
    const Eigen::VectorXd back = q.transform_matrix * (q.transform_matrix * u);
    CHECK((back - u).norm() / u.norm() < 1e-8);
  }
  CHECK_THROWS(build_plan(0.0, 4, 10.0));
  CHECK_THROWS(build_plan(0.0, 64, -1.0));
}

TEST_CASE("order one half is a sine transform") {
  const int n = 64;
  const double S = 10.0;
  const HankelPlan p = build_plan(0.5, n, S);
  // sqrt(s rho) J_{1/2}(s rho) = sqrt(2/pi) sin(s rho); on the zero grid this is a DST-I.
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double ref = std::sqrt(2.0 / std::numbers::pi) * std::sin(p.s_nodes[i] * p.rho_nodes[k]);
      const double rebuilt = p.forward_matrix(k, i) / p.s_weights[i];
      worst = std::max(worst, std::abs(rebuilt - ref));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("forward transform of a Gaussian profile") {
  const HankelPlan p = build_plan(0.0, 128, 10.0);
  CHECK(forward(p, Eigen::VectorXd::Zero(128)).cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd g(128);
  for (int i = 0; i < 128; ++i) g[i] = std::sqrt(p.s_nodes[i]) * std::exp(-p.s_nodes[i] * p.s_nodes[i]);
  const Eigen::VectorXd G = forward(p, g);
  double worst = 0.0;
  for (int k = 0; k < 128; ++k) {
    const double rho = p.rho_nodes[k];
    if (rho >= 0.5 * p.rho_max) break;
    const double closed = std::sqrt(rho) * std::exp(-rho * rho / 4.0) / 2.0;
    const double quad = oracles::integrate(
        [&](double s) { return std::sqrt(s * rho) * bessel_j(BesselOrder(0.0), s * rho) * std::sqrt(s) * std::exp(-s * s); }, 0.0,
        12.0, 1e-13);
    CHECK(std::abs(quad - closed) < 1e-9);
    worst = std::max(worst, std::abs(G[k] - closed) / std::max(closed, 1e-3));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("isometry and round trips") {
  std::mt19937_64 rng(7);
  for (double nu : {0.0, 1.0, 2.5}) {
    const HankelPlan p = build_plan(nu, 96, 8.0);
    for (int r = 0; r < 5; ++r) {
      const Eigen::VectorXd u = random_vector(96, rng), v = random_vector(96, rng);
      CHECK(std::abs(spectral_norm(p, forward(p, u)) - physical_norm(p, u)) < 1e-8 * physical_norm(p, u));
      CHECK((inverse(p, forward(p, u)) - u).norm() < 1e-8 * u.norm());
      CHECK((forward(p, inverse(p, u)) - u).norm() < 1e-8 * u.norm());
      const Eigen::VectorXd lin = inverse(p, Eigen::VectorXd(2.0 * u - 3.0 * v));
      CHECK((lin - (2.0 * inverse(p, u) - 3.0 * inverse(p, v))).cwiseAbs().maxCoeff() <
            1e-12 * lin.cwiseAbs().maxCoeff());
    }
  }
  const HankelPlan p = build_plan(0.0, 32, 8.0);
  CHECK_THROWS_AS(forward(p, Eigen::VectorXd::Zero(31)), std::invalid_argument);
}

TEST_CASE("one-hot spectrum synthesises a Bessel profile") {
  const double nu = 1.0;
  const HankelPlan p = build_plan(nu, 64, 10.0);
  for (int k : {0, 5, 20}) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(64);
    e[k] = 1.0;
    const Eigen::VectorXd prof = inverse(p, e);
    Eigen::VectorXd ref(64);
    for (int i = 0; i < 64; ++i) {
      const double x = p.s_nodes[i] * p.rho_nodes[k];
      ref[i] = std::sqrt(x) * bessel_j(BesselOrder(nu), x);
    }
    const double corr = prof.dot(ref) / (prof.norm() * ref.norm());
    CHECK(std::abs(corr) > 0.999);
  }
}

TEST_CASE("synthesis interpolates band-limited samples") {
  const HankelPlan p = build_plan(0.0, 128, 10.0);
  Eigen::VectorXd g(128);
  for (int i = 0; i < 128; ++i) g[i] = std::sqrt(p.s_nodes[i]) * std::exp(-p.s_nodes[i] * p.s_nodes[i]);
  Eigen::VectorXd s(3);
  s << 0.37, 1.11, 2.9;
  const Eigen::VectorXd v = interpolation_matrix(p, s) * g;
  for (int i = 0; i < 3; ++i) CHECK(v[i] == doctest::Approx(std::sqrt(s[i]) * std::exp(-s[i] * s[i])).epsilon(1e-8));
}
