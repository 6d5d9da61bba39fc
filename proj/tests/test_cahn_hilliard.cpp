#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "edgeheat/cahn_hilliard.hpp"
#include "edgeheat/oracle.hpp"

using namespace edgeheat;

namespace {

DiscretizationPtr cone(double s_max = 10.0, int n = 128, int max_mode = 4) {
  return make_discretization(make_geometry(0, circle_fiber(max_mode, 0.5), s_max), n);
}

EdgeField bump(const DiscretizationPtr& d, double amp = 0.1) {
  return radial_field(d, [amp](double s, double) { return amp * std::exp(-(s - 1) * (s - 1)); }, Convention::Geometric);
}

double sup_diff(const EdgeField& a, const EdgeField& b) {
  return nodal_sup(with_convention(a, Convention::Rescaled) - with_convention(b, Convention::Rescaled));
}

SolverConfig config(Nonlinearity kind = Nonlinearity::CahnHilliard) {
  SolverConfig c;
  c.nonlinearity = kind;
  return c;
}

}  // namespace

TEST_CASE("nonlinearity") {
  const auto d = cone();
  CHECK(nodal_sup(apply_Q(zero_field(d, Convention::Geometric))) == 0.0);
  for (double c : {1.0, -1.0, 0.3, 2.0}) CHECK(nodal_sup(apply_Q(constant_field(d, c, Convention::Geometric))) < 1e-12);

  // Delta(u - u^3) for a radial profile on the 2-dimensional cone: -(w'' + w'/s).
  // The ring is even in s so that w'/s stays bounded at the tip.
  const auto ring = [](double s) { return 0.1 * std::exp(-(s * s - 1) * (s * s - 1)); };
  const auto w = [&](double s) { return ring(s) - std::pow(ring(s), 3); };
  const EdgeField q = apply_Q(radial_field(d, [&](double s, double) { return ring(s); }, Convention::Geometric));
  const auto& s = d->plan(0).s_nodes;
  const Eigen::VectorXd g = component_profile(q, 0, s) / std::sqrt(std::numbers::pi);
  double err = 0.0, scale = 0.0;
  const double h = 1e-4;
  for (Eigen::Index i = 0; i < s.size() && s[i] < 5.0; ++i) {
    const double d1 = (w(s[i] + h) - w(s[i] - h)) / (2 * h);
    const double d2 = (w(s[i] + h) - 2 * w(s[i]) + w(s[i] - h)) / (h * h);
    const double ref = -(d2 + d1 / s[i]);
    err = std::max(err, std::abs(g[i] - ref));
    scale = std::max(scale, std::abs(ref));
  }
  CHECK(err / scale < 1e-3);

  const auto coarse = make_discretization(make_geometry(0, circle_fiber(4, 0.5), 10.0), 64, 0.0, 1, 3);
  const EdgeField m = mode_field(coarse, 3, [](double s, double) { return s * std::exp(-s * s); }, Convention::Geometric);
  CHECK_THROWS_AS(apply_Q(m), AliasingError);
  CHECK(nodal_sup(apply_Q(m, Nonlinearity::Linear)) > 0.0);
}

TEST_CASE("duhamel map") {
  const auto d = cone();
  const EdgeField one = constant_field(d, 1.0, Convention::Geometric);
  const Trajectory free1 = free_trajectory(one, 0.05, 10);
  const Trajectory mapped = duhamel_map(free1, one);
  CHECK(trajectory_distance(mapped, free1) < 1e-12);

  const EdgeField u0 = bump(d);
  const Trajectory free = free_trajectory(u0, 0.05, 10);
  const Trajectory noq = duhamel_map(free_trajectory(bump(d, 0.7), 0.05, 10), u0, Nonlinearity::None);
  CHECK(trajectory_distance(noq, free) < 1e-10);
}

TEST_CASE("linearised flow matches its multiplier") {
  const auto d = cone();
  const EdgeField u0 = bump(d) + mode_field(d, 1, [](double s, double) { return 0.1 * s * s * std::exp(-s * s); },
                                            Convention::Geometric);
  const Trajectory tr = picard_solve(u0, config(Nonlinearity::Linear));
  REQUIRE(tr.converged);
  const double T = tr.T;
  const EdgeField exact = apply_symbol(u0, [T](double mu) { return std::exp(-T * (mu * mu - mu)); }, true);
  CHECK(sup_diff(tr.fields.back(), exact) < 1e-5);
}

TEST_CASE("picard solve") {
  const auto d = cone();
  const Trajectory one = picard_solve(constant_field(d, 1.0, Convention::Geometric), config());
  CHECK(one.converged);
  CHECK(one.iterations == 1);

  const Trajectory tr = picard_solve(bump(d), config());
  REQUIRE(tr.converged);
  CHECK(tr.T == doctest::Approx(0.05));
  CHECK(tr.max_contraction() < 1.0);

  const FDOperator op = build_fd(0.0, 512, 10.0);
  const Eigen::VectorXd w0 = (0.1 * (-(op.nodes.array() - 1).square()).exp()).matrix();
  const FDSolveResult ref = fd_ch_solve(op, w0, 0.0, tr.T, 8);
  REQUIRE(ref.converged);
  const Eigen::VectorXd sp = component_profile(tr.fields.back(), 0, op.nodes) / std::sqrt(std::numbers::pi);
  const int inner = 3 * op.n / 4;
  CHECK((sp - ref.values).head(inner).cwiseAbs().maxCoeff() / ref.values.head(inner).cwiseAbs().maxCoeff() < 1e-2);

  // Larger data never buys a longer interval.
  SolverConfig big = config();
  big.T = 2.0;
  const Trajectory a = picard_solve(bump(d, 1.0), big), b = picard_solve(bump(d, 2.0), big);
  CHECK(b.T <= a.T);

  SolverConfig bad = config();
  bad.n_time = 0;
  CHECK_THROWS(picard_solve(bump(d), bad));
}

TEST_CASE("march") {
  const auto d = cone();
  const SolverConfig cfg = config();
  const Trajectory single = picard_solve(bump(d), cfg);
  REQUIRE(single.converged);
  const Trajectory same = march(bump(d), single.T, cfg);
  CHECK(sup_diff(same.fields.back(), single.fields.back()) < 1e-14);

  SolverConfig half = cfg;
  half.T = 0.025;
  half.n_time = 25;
  const Trajectory two = march(bump(d), 0.05, half);
  REQUIRE(two.converged);
  CHECK(two.times.back() == doctest::Approx(0.05));
  CHECK(sup_diff(two.fields.back(), single.fields.back()) < 5e-3);

  const Trajectory c = march(constant_field(d, -1.0, Convention::Geometric), 0.2, cfg);
  REQUIRE(c.converged);
  CHECK(sup_diff(c.fields.back(), constant_field(d, -1.0, Convention::Geometric)) < 1e-14);
}

TEST_CASE("diagnostics") {
  const auto d = cone(20.0, 256);
  const Diagnostics flat = diagnostics(picard_solve(constant_field(d, 1.0, Convention::Geometric), config()));
  CHECK(flat.mass_drift == 0.0);
  CHECK(flat.max_energy_increase == 0.0);
  CHECK(flat.tip_fits.empty());

  const EdgeField u0 = bump(d) + mode_field(d, 1, [](double s, double) { return 0.1 * s * s * std::exp(-(s - 1) * (s - 1)); },
                                            Convention::Geometric);
  const Trajectory tr = picard_solve(u0, config());
  REQUIRE(tr.converged);
  const Diagnostics diag = diagnostics(tr);
  CHECK(diag.mass_drift <= 1e-6);
  CHECK(diag.energy_monotone);
  CHECK(diag.energy.back() < diag.energy.front());
  bool saw_mode1 = false;
  for (const TipFit& f : diag.tip_fits) {
    CHECK(f.matches);
    if (f.entry == 1) {
      saw_mode1 = true;
      CHECK(std::abs(f.gamma - 2.0) < 0.05);  // nu = k / c = 2 on the circle of radius 1/2
    }
  }
  CHECK(saw_mode1);

  const auto dir = std::filesystem::temp_directory_path() / "edgeheat_traj";
  std::filesystem::remove_all(dir);
  const auto manifest = write_trajectory(tr, diag, dir, "u");
  CHECK(std::filesystem::exists(manifest));
  std::filesystem::remove_all(dir);
}
