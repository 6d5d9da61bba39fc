#include <doctest.h>

#include <cmath>
#include <numbers>

#include "edgeheat/specfun.hpp"
#include "oracles.hpp"

using namespace edgeheat;
using std::numbers::pi;

TEST_CASE("bessel_j special values") {
  CHECK(bessel_j(BesselOrder(0.0), 0.0) == doctest::Approx(1.0));
  CHECK(bessel_j(BesselOrder(1.0), 0.0) == 0.0);
  CHECK(std::abs(bessel_j(BesselOrder(0.5), pi)) < 1e-14);
  CHECK(std::abs(bessel_j(BesselOrder(0.0), 2.404825557695773)) < 1e-10);
}

TEST_CASE("bessel_j half-integer closed forms across regimes") {
  for (double x : {0.01, 0.7, 3.0, 12.5, 40.0, 150.0, 900.0}) {
    const double j12 = std::sqrt(2.0 / (pi * x)) * std::sin(x);
    const double j32 = std::sqrt(2.0 / (pi * x)) * (std::sin(x) / x - std::cos(x));
    CHECK(std::abs(bessel_j(BesselOrder(0.5), x) - j12) < 1e-12 * std::max(1.0, std::abs(j12) * 10));
    CHECK(std::abs(bessel_j(BesselOrder(1.5), x) - j32) < 1e-12 * std::max(1.0, std::abs(j32) * 10));
  }
}

TEST_CASE("bessel_j agrees with its integral representation") {
  // J_n(x) = (1/pi) int_0^pi cos(n tau - x sin tau) d tau
  for (int n : {0, 1, 3}) {
    for (double x : {0.3, 5.0, 27.0, 80.0}) {
      const double ref = oracles::integrate([&](double tau) { return std::cos(n * tau - x * std::sin(tau)); }, 0.0, pi,
                                            1e-14) / pi;
      CHECK(std::abs(bessel_j(BesselOrder(double(n)), x) - ref) < 1e-11);
    }
  }
}

TEST_CASE("bessel_j rejects negative order") { CHECK_THROWS_AS(BesselOrder(-0.5), std::domain_error); }

TEST_CASE("bessel zeros") {
  const auto z0 = bessel_zeros(BesselOrder(0.0), 1);
  REQUIRE(z0.size() == 1);
  CHECK(z0[0] == doctest::Approx(2.404825557695773).epsilon(1e-14));
  const auto zh = bessel_zeros(BesselOrder(0.5), 2);
  CHECK(zh[0] == doctest::Approx(pi).epsilon(1e-13));
  CHECK(zh[1] == doctest::Approx(2 * pi).epsilon(1e-13));

  const auto a = bessel_zeros(BesselOrder(0.0), 6), b = bessel_zeros(BesselOrder(1.0), 6);
  for (int k = 0; k < 5; ++k) {
    CHECK(a[k] < b[k]);
    CHECK(b[k] < a[k + 1]);
  }
  // Deep zeros still vanish and keep the McMahon spacing ~ pi.
  const auto deep = bessel_zeros(BesselOrder(2.5), 300);
  for (int k : {0, 50, 299}) CHECK(std::abs(bessel_j(BesselOrder(2.5), deep[k])) < 1e-10);
  CHECK(deep[299] - deep[298] == doctest::Approx(pi).epsilon(1e-4));
}

TEST_CASE("gauss-legendre rules") {
  const auto mid = gauss_legendre(1, 0.0, 2.0);
  CHECK(mid.nodes[0] == doctest::Approx(1.0));
  CHECK(mid.weights[0] == doctest::Approx(2.0));
  CHECK(std::abs(gauss_legendre(2, 0.0, 1.0).integrate([](double x) { return x * x; }) - 1.0 / 3.0) < 1e-14);
  CHECK(std::abs(gauss_legendre(3, 0.0, 1.0).integrate([](double x) { return std::pow(x, 5); }) - 1.0 / 6.0) < 1e-13);

  for (int n : {5, 20, 64}) {
    const auto r = gauss_legendre(n, -1.5, 4.0);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      CHECK(r.nodes[i] > -1.5);
      CHECK(r.nodes[i] < 4.0);
      CHECK(r.weights[i] > 0.0);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
    }
    CHECK(std::abs(r.weights.sum() - 5.5) < 1e-12 * 5.5);
  }
  const auto c = composite_gauss_legendre(8, 10, 0.0, pi);
  CHECK(std::abs(c.integrate([](double x) { return std::sin(x); }) - 2.0) < 1e-13);
}
