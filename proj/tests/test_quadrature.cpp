#include "common.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/beta.hpp>

#include <numbers>

using namespace latticediff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly", "[quadrature]") {
  const auto rule = quad::gauss_legendre(8);
  for (int p = 0; p <= 15; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) s += rule.weights[j] * std::pow(rule.nodes[j], p);
    const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
    CHECK_THAT(s, WithinAbs(exact, 1e-14));
  }
}

TEST_CASE("Gauss-Jacobi reproduces Beta-function moments", "[quadrature]") {
  // int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
  for (auto [a, b] : {std::pair{-0.5, -0.5}, {0.5, 0.5}, {1.0, 1.0}, {0.0, 2.5}}) {
    const auto rule = quad::gauss_jacobi(24, a, b);
    double s = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      s += rule.weights[j];
      s2 += rule.weights[j] * (1.0 + rule.nodes[j]);
    }
    CHECK_THAT(s, WithinRel(std::pow(2.0, a + b + 1) * boost::math::beta(a + 1, b + 1), 1e-13));
    CHECK_THAT(s2, WithinRel(std::pow(2.0, a + b + 2) * boost::math::beta(a + 1, b + 2), 1e-13));
  }
}

TEST_CASE("sphere areas", "[quadrature]") {
  constexpr double pi = std::numbers::pi;
  CHECK_THAT(quad::sphere_area(1), WithinRel(2.0, 1e-15));
  CHECK_THAT(quad::sphere_area(2), WithinRel(2 * pi, 1e-15));
  CHECK_THAT(quad::sphere_area(3), WithinRel(4 * pi, 1e-15));
  CHECK_THAT(quad::sphere_area(4), WithinRel(2 * pi * pi, 1e-15));
}

TEST_CASE("sphere direction rules carry the full area and are inversion closed", "[quadrature]") {
  for (int d : {1, 2, 3, 4}) {
    const auto r = quad::sphere_rule(d, 16);
    double w = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < r.nodes.size(); ++j) {
      w += r.weights[j];
      mean += r.weights[j] * r.nodes[j];
      CHECK_THAT(r.nodes[j].norm(), WithinAbs(1.0, 1e-14));
    }
    CHECK_THAT(w, WithinRel(quad::sphere_area(d), 1e-14));
    CHECK(mean.norm() < 1e-13);
  }
}

TEST_CASE("sphere Fourier factor: Jacobi nodes against the Bessel closed form", "[quadrature]") {
  for (int d : {2, 3, 4, 5, 6}) {
    const quad::SphereFourier s(d, 64);
    for (double z : {0.1, 1.0, 3.7, 12.0, 40.0, 63.0}) {
      const double ref = quad::SphereFourier::by_bessel(d, z);
      CHECK_THAT(s.by_jacobi(z), WithinAbs(ref, 1e-12 * quad::sphere_area(d)));
    }
    CHECK_THAT(s(0.0), WithinRel(quad::sphere_area(d), 1e-14));
  }
  // elementary closed forms
  const quad::SphereFourier s3(3);
  CHECK_THAT(s3(2.5), WithinAbs(4 * std::numbers::pi * std::sin(2.5) / 2.5, 1e-13));
  const quad::SphereFourier s1(1);
  CHECK_THAT(s1(0.7), WithinAbs(2 * std::cos(0.7), 1e-15));
}
