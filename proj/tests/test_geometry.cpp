#include <doctest.h>

#include <cmath>
#include <vector>

#include "edgeheat/geometry.hpp"

using namespace edgeheat;

namespace {

// Gram matrix of every retained eigenfunction copy under the fiber quadrature.
double orthonormality_residual(const FiberSpectrum& fs) {
  const FiberQuadrature q = fs.quadrature(2 * fs.required_resolution() + 4);
  std::vector<Eigen::VectorXd> cols;
  for (const FiberMode& m : fs.entries) {
    for (int c = 0; c < m.multiplicity; ++c) {
      Eigen::VectorXd v(q.size());
      for (Eigen::Index p = 0; p < q.size(); ++p) {
        const Eigen::VectorXd z = q.points.col(p);
        v[p] = m.eigenfunction(std::span<const double>(z.data(), z.size()), c);
      }
      cols.push_back(v);
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double g = (cols[i].cwiseProduct(cols[j])).dot(q.weights);
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

std::vector<double> sigmas(const FiberSpectrum& fs) {
  std::vector<double> s;
  for (const auto& m : fs.entries) s.push_back(m.sigma_sq);
  return s;
}

}  // namespace

TEST_CASE("circle spectrum") {
  CHECK(sigmas(circle_fiber(2, 1.0)) == std::vector<double>{0, 1, 4});
  CHECK(sigmas(circle_fiber(1, 0.5)) == std::vector<double>{0, 4});
  const auto fs = circle_fiber(3, 0.7);
  CHECK(fs.entries[0].multiplicity == 1);
  CHECK(fs.entries[2].multiplicity == 2);
  CHECK(orthonormality_residual(fs) < 1e-10);
}

TEST_CASE("sphere spectrum") {
  const auto s2 = sphere_fiber(2, 2, 1.0);
  CHECK(sigmas(s2) == std::vector<double>{0, 2, 6});
  std::vector<int> mult;
  for (const auto& m : s2.entries) mult.push_back(m.multiplicity);
  CHECK(mult == std::vector<int>{1, 3, 5});
  CHECK(orthonormality_residual(s2) < 1e-10);
  CHECK(orthonormality_residual(sphere_fiber(2, 3, 0.8)) < 1e-10);
  CHECK(sigmas(sphere_fiber(3, 1, 1.0)) == std::vector<double>{0, 3});
}

TEST_CASE("geometry validation") {
  const auto g = make_geometry(1, sphere_fiber(2, 1, 1.0), 10.0);
  CHECK(g.total_dim() == 4);
  CHECK_THROWS(make_geometry(-1, circle_fiber(1, 1.0), 10.0));
  CHECK_THROWS(make_geometry(0, circle_fiber(1, 1.0), 0.0));
  CHECK_THROWS(circle_fiber(1, -1.0));
}

TEST_CASE("nu of sigma") {
  CHECK(nu_of_sigma(0.0, 1) == 0.0);
  CHECK(nu_of_sigma(0.0, 2) == doctest::Approx(0.5));
  CHECK(nu_of_sigma(3.0, 2) == doctest::Approx(std::sqrt(3.25)));
}

TEST_CASE("indicial roots") {
  const auto r0 = indicial_roots(0.0);
  CHECK(r0.gamma_plus == 0.5);
  CHECK(r0.gamma_minus == 0.5);
  CHECK(r0.logarithmic);
  const auto rh = indicial_roots(0.5);
  CHECK(rh.gamma_plus == 1.0);
  CHECK(rh.gamma_minus == 0.0);
  CHECK_FALSE(rh.logarithmic);
  const auto r2 = indicial_roots(2.0);
  CHECK(r2.gamma_plus == 2.5);
  CHECK(r2.gamma_minus == -1.5);
}

TEST_CASE("index sets") {
  const auto circle = make_geometry(0, circle_fiber(4, 1.0), 10.0);
  CHECK(index_set(circle, 3.5).exponents() == std::vector<double>{0, 1, 2, 3});
  const auto sphere = make_geometry(0, sphere_fiber(2, 3, 1.0), 10.0);
  const auto ex = index_set(sphere, 2.5).exponents();
  REQUIRE(ex.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(ex[i] == doctest::Approx(i).epsilon(1e-12));

  // Every exponent is generated by a listed eigenvalue plus an even shift.
  const auto odd = make_geometry(0, circle_fiber(3, 0.7), 10.0);
  const auto set = index_set(odd, 9.0);
  CHECK(set.entries.front().gamma == 0.0);
  for (const auto& e : set.entries) {
    REQUIRE_FALSE(e.sources.empty());
    for (const auto& src : e.sources) {
      CHECK(e.gamma == doctest::Approx(nu_of_sigma(src.sigma_sq, 1) + 2 * src.shift).epsilon(1e-12));
    }
  }
}

TEST_CASE("admissibility") {
  CHECK(check_admissible(make_geometry(0, circle_fiber(2, 1.0), 10.0)).admissible_i == false);
  CHECK(check_admissible(make_geometry(0, circle_fiber(2, 0.5), 10.0)).admissible_i == true);
  CHECK(check_admissible(make_geometry(0, sphere_fiber(2, 1, 1.0), 10.0)).admissible_i == false);
  const auto r = check_admissible(make_geometry(0, sphere_fiber(2, 1, 0.9), 10.0));
  CHECK(r.admissible_i == true);
  CHECK(r.lambda0 == doctest::Approx(2.0 / 0.81));
  CHECK_FALSE(check_admissible(make_geometry(0, circle_fiber(0, 1.0), 10.0)).admissible_i.has_value());
}
