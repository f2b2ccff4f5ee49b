#include "common.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace latticediff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double pi = std::numbers::pi;

DispersionSpec nearest() { return {}; }

DispersionSpec anisotropic() {
  DispersionSpec s;
  s.kind = DispersionKind::CosineSeries;
  s.coefficients = {{1.0, 0.2, 0.05}, {0.5}};
  return s;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
}  // namespace

TEST_CASE("nearest-neighbour dispersion values", "[model]") {
  CHECK(dispersion_eval(nearest(), vec({0.0})) == 0.0);
  CHECK_THAT(dispersion_eval(nearest(), vec({pi})), WithinAbs(4.0, 1e-15));
  CHECK_THAT(dispersion_eval(nearest(), vec({pi / 2, pi / 2})), WithinAbs(4.0, 1e-14));
}

TEST_CASE("dispersion gradient", "[model]") {
  CHECK(dispersion_grad(nearest(), vec({0.0}))(0) == 0.0);
  CHECK_THAT(dispersion_grad(nearest(), vec({pi / 2}))(0), WithinAbs(2.0, 1e-15));

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-pi, pi);
  const double h = 1e-4;
  for (const auto& spec : {nearest(), anisotropic()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd k = vec({u(gen), u(gen)});
      const Eigen::VectorXd g = dispersion_grad(spec, k);
      for (int i = 0; i < 2; ++i) {
        Eigen::VectorXd kp = k, km = k;
        kp(i) += h;
        km(i) -= h;
        const double fd = (dispersion_eval(spec, kp) - dispersion_eval(spec, km)) / (2 * h);
        CHECK_THAT(g(i), WithinAbs(fd, 1e-8));
      }
    }
  }
}

TEST_CASE("complex momenta agree with the real evaluation on the real axis", "[model]") {
  const std::vector<std::complex<double>> kc{{0.3, 0.0}, {-1.1, 0.0}};
  const auto ec = dispersion_eval<std::complex<double>>(anisotropic(), kc);
  CHECK_THAT(ec.real(), WithinAbs(dispersion_eval(anisotropic(), vec({0.3, -1.1})), 1e-14));
  CHECK(ec.imag() == 0.0);
}

TEST_CASE("momentum grid is closed under inversion and dispersion is exactly even on it", "[model]") {
  for (int d : {1, 2, 3}) {
    const MomentumGrid g(d, 8);
    CHECK(g.size() == static_cast<std::size_t>(std::pow(8, d)));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = g.negate(i);
      CHECK(g.negate(j) == i);
      const Eigen::VectorXd ki = g.k(i), kj = g.k(j);
      for (int a = 0; a < d; ++a) {
        // either exact negatives or both at the zone boundary -pi
        const bool ok = ki(a) == -kj(a) || (ki(a) == kj(a) && std::abs(std::abs(ki(a)) - pi) < 1e-15);
        CHECK(ok);
      }
      CHECK(dispersion_eval(anisotropic(), ki.head(std::min(d, 2))) ==
            dispersion_eval(anisotropic(), kj.head(std::min(d, 2))));
    }
  }
  CHECK_THROWS_AS(MomentumGrid(1, 7), ConfigError);
}

TEST_CASE("grid flatten and unflatten are inverse", "[model]") {
  const MomentumGrid g(3, 6);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flatten(g.unflatten(i)) == i);
}

TEST_CASE("good model validates", "[model]") {
  const auto cfg = testing::config("good.json");
  const auto rep = validate_model(cfg);
  for (const auto& c : rep.checks) INFO(c.name << ": " << c.detail);
  CHECK(rep.ok());
  CHECK(rep.warnings.size() == 1);  // d < 4
}

TEST_CASE("two levels coupled off-diagonally form a connected FGR graph", "[model]") {
  const auto rep = validate_model(testing::config("ref1d.json"));
  CHECK(rep.ok());
  REQUIRE(testing::find_check(rep, "fgr_connected"));
  CHECK(testing::find_check(rep, "fgr_connected")->pass);
}

TEST_CASE("identity coupling has no FGR edges", "[model]") {
  const auto cfg = testing::config("w_identity.json");
  const auto rep = validate_model(cfg);
  CHECK_FALSE(rep.ok());
  CHECK(rep.failures() == std::vector<std::string>{"fgr_connected"});
  CHECK_THROWS_AS(ensure_valid(cfg), ConfigError);
}

TEST_CASE("three levels with only 0-1 coupling leave level 2 isolated", "[model]") {
  const auto rep = validate_model(testing::config("three_level_isolated.json"));
  const auto* fgr = testing::find_check(rep, "fgr_connected");
  REQUIRE(fgr);
  CHECK_FALSE(fgr->pass);
  CHECK(fgr->detail.find("2") != std::string::npos);
}

TEST_CASE("equal level spacings violate distinct Bohr frequencies", "[model]") {
  auto cfg = testing::config("ref1d.json");
  cfg.spin.levels = {0.0, 1.0, 2.0};
  cfg.spin.couplings = Eigen::MatrixXcd::Ones(3, 3) * 0.3;
  const auto rep = validate_model(cfg);
  CHECK_FALSE(testing::find_check(rep, "bohr_frequencies_distinct")->pass);
}

TEST_CASE("non-Hermitian couplings are rejected", "[model]") {
  auto cfg = testing::config("good.json");
  cfg.spin.couplings(0, 1) = {0.5, 0.3};
  CHECK_FALSE(testing::find_check(validate_model(cfg), "coupling_hermitian")->pass);
}

TEST_CASE("constant direction in the dispersion is rejected", "[model]") {
  auto cfg = testing::config("aniso2d.json");
  cfg.dispersion.coefficients = {{1.0}, {0.0}};
  CHECK_FALSE(testing::find_check(validate_model(cfg), "dispersion_nonconstant")->pass);
}

TEST_CASE("validation is deterministic", "[model]") {
  const auto cfg = testing::config("good.json");
  CHECK(validate_model(cfg).to_json().dump() == validate_model(cfg).to_json().dump());
}

TEST_CASE("config JSON round trip", "[model]") {
  for (const char* name : {"good.json", "ref1d.json", "aniso2d.json", "tabulated1d.json"}) {
    const auto cfg = testing::config(name);
    const auto again = model_from_json(model_to_json(cfg));
    CHECK(model_to_json(again).dump() == model_to_json(cfg).dump());
    CHECK(again.spin.couplings.isApprox(cfg.spin.couplings));
  }
}

TEST_CASE("malformed configs raise ConfigError", "[model]") {
  auto j = model_to_json(testing::config("ref1d.json"));
  auto missing = j;
  missing.erase("beta");
  CHECK_THROWS_AS(model_from_json(missing), ConfigError);
  auto bad_kind = j;
  bad_kind["bath"]["kind"] = "lorentzian";
  CHECK_THROWS_AS(model_from_json(bad_kind), ConfigError);
  auto wrong_type = j;
  wrong_type["dim"] = "one";
  CHECK_THROWS_AS(model_from_json(wrong_type), ConfigError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ConfigError);
}
