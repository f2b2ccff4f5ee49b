#include "common.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace latticediff;
using namespace latticediff::kmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double pi = std::numbers::pi;

// circular distance on the momentum torus
double torus_gap(double a, double b) {
  double d = std::remainder(a - b, 2.0 * pi);
  return std::abs(d);
}
}  // namespace

TEST_CASE("escape rates on the reference model", "[kmc]") {
  const JumpProcess proc(testing::config("ref1d.json"));
  // psi_hat(1) = 1, |<0,W 1>| = 1, |S^0| = 2
  CHECK_THAT(proc.escape(1), WithinRel(4.0 * pi, 1e-12));
  CHECK_THAT(proc.escape(0), WithinRel(4.0 * pi * std::exp(-1.0), 1e-12));
}

TEST_CASE("waiting times are exponential with the escape rate", "[kmc]") {
  const JumpProcess proc(testing::config("ref1d.json"));
  for (int level : {0, 1}) {
    const auto w = sample_waiting_times(proc, level, 10000, 7);
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= double(w.size());
    const double j = proc.escape(level);
    // the sample mean of 1e4 exponentials has relative SE 1%
    CHECK_THAT(mean * j, WithinAbs(1.0, 0.04));
    const double dstat = ks_statistic_exponential(w, j);
    CHECK(ks_pvalue(dstat, w.size()) > 0.001);
  }
}

TEST_CASE("KS and chi-square tails against closed forms", "[kmc]") {
  // chi-square with 2 dof: P(X > s) = e^{-s/2}
  CHECK_THAT(chi_square_pvalue(3.0, 2), WithinRel(std::exp(-1.5), 1e-12));
  // Kolmogorov tail at 1.3581 is the classical 5% point
  const std::size_t n = 1000000;
  const double sn = std::sqrt(double(n));
  CHECK_THAT(ks_pvalue(1.3581 / (sn + 0.12 + 0.11 / sn), n), WithinAbs(0.05, 1e-4));
  // the exponential law fitted to its own quantiles has no discrepancy beyond 1/n
  std::vector<double> q;
  for (int i = 0; i < 1000; ++i) q.push_back(-std::log1p(-(i + 0.5) / 1000.0) / 2.0);
  CHECK(ks_statistic_exponential(q, 2.0) <= 0.5 / 1000.0 + 1e-12);
}

TEST_CASE("each jump kicks k by the level gap and flips the level", "[kmc]") {
  const auto cfg = testing::config("ref1d.json");
  const JumpProcess proc(cfg);
  const auto path = record_path(proc, 11, 3, 50.0);
  REQUIRE(path.size() > 100);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto& a = path[i - 1];
    const auto& b = path[i];
    REQUIRE(b.k(0) >= -pi);
    REQUIRE(b.k(0) < pi);
    // free flight at the old momentum
    CHECK_THAT(b.x(0) - a.x(0), WithinAbs(2.0 * std::sin(a.k(0)) * (b.t - a.t), 1e-9));
    if (b.jumps == a.jumps) continue;
    CHECK(b.level != a.level);
    CHECK_THAT(torus_gap(b.k(0), a.k(0)), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("without couplings the motion is ballistic", "[kmc]") {
  auto cfg = testing::config("ref1d.json");
  cfg.spin.couplings.setZero();
  const JumpProcess proc(cfg);
  CHECK(proc.escape(0) == 0.0);
  const auto st = run_trajectory(proc, 5, 0, 37.0);
  CHECK(st.jumps == 0);
  CHECK(st.t == 37.0);
  CHECK_THAT(st.x(0), WithinAbs(2.0 * std::sin(st.k(0)) * 37.0, 1e-12));
}

TEST_CASE("directions in d = 3 are unit and isotropic", "[kmc]") {
  auto cfg = testing::config("good.json");
  cfg.dim = 3;
  const JumpProcess proc(cfg);
  Rng rng(1, 2);
  const int n = 40000;
  Eigen::Vector3d m = Eigen::Vector3d::Zero(), m2 = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd s = proc.direction(rng);
    REQUIRE_THAT(s.norm(), WithinAbs(1.0, 1e-14));
    m += s;
    m2 += s.cwiseProduct(s);
  }
  m /= n;
  m2 /= n;
  for (int i = 0; i < 3; ++i) {
    // per-component SE: sqrt(1/3 / n) and sqrt(4/45 / n)
    CHECK(std::abs(m(i)) < 4.0 * std::sqrt(1.0 / 3.0 / n));
    CHECK(std::abs(m2(i) - 1.0 / 3.0) < 4.0 * std::sqrt(4.0 / 45.0 / n));
  }
}

TEST_CASE("ensemble statistics do not depend on the thread count", "[kmc]") {
  const JumpProcess proc(testing::config("ref1d.json"));
  const std::vector<Eigen::VectorXd> probes{Eigen::VectorXd::Constant(1, 0.3)};
  EnsembleOptions one, three;
  one.threads = 1;
  three.threads = 3;
  const auto a = run_ensemble(proc, 301, 20.0, probes, 99, one);
  const auto b = run_ensemble(proc, 301, 20.0, probes, 99, three);
  CHECK(a.total_jumps == b.total_jumps);
  CHECK(a.mean_x == b.mean_x);
  CHECK(a.D == b.D);
  CHECK(a.D_se == b.D_se);
  CHECK(a.level_hist == b.level_hist);
  CHECK(a.k_hist == b.k_hist);
  CHECK(a.probes[0].mean == b.probes[0].mean);
  const auto c = run_ensemble(proc, 301, 20.0, probes, 100, one);
  CHECK(a.mean_x != c.mean_x);
}

TEST_CASE("ensemble diffusion agrees with the spectral tensor", "[kmc]") {
  const auto cfg = testing::config("ref1d.json");
  const generator::GeneratorMatrices gen(cfg);
  const double d_ref = spectral::diffusion_tensor_formula(gen).D(0, 0);
  const JumpProcess proc(cfg);
  const auto st = run_ensemble(proc, 2000, 500.0, {}, 2024);
  CHECK(std::abs(st.D(0, 0) - d_ref) < 4.0 * st.D_se(0, 0));
  CHECK(std::abs(st.mean_x(0)) < 4.0 * st.mean_x_se(0));
  CHECK(st.chi_square_p > 1e-3);
  // 2000 draws over 32 bins: expected TV near 0.045
  CHECK(st.k_tv < 0.1);
  CHECK(st.level_hist[0] + st.level_hist[1] == 2000);
}

TEST_CASE("cumulant generating function at small p", "[kmc]") {
  const auto cfg = testing::config("ref1d.json");
  const JumpProcess proc(cfg);
  const auto zero = cgf_estimate(proc, Eigen::VectorXd::Zero(1), 10, 1.0, 1);
  CHECK(zero.value == cplx(0.0, 0.0));

  const generator::GeneratorMatrices gen(cfg);
  const spectral::PerronTracker tr(gen);
  const double p = 0.1;
  const Eigen::VectorXd pv = Eigen::VectorXd::Constant(1, p);
  const cplx f = tr.at(pv).value;
  // t = 2 / (p^2 D) keeps |E e^{-ipx}| near e^{-1}
  const double t = -1.0 / f.real();
  const auto est = cgf_estimate(proc, pv, 2000, t, 77);
  CHECK(std::abs(est.value.real() - f.real()) < 4.0 * est.se);
  CHECK(std::abs(est.value.imag() - f.imag()) < 4.0 * est.se);
  CHECK(est.warnings.empty());
}

TEST_CASE("momentum wrap lands in [-pi, pi)", "[kmc]") {
  for (double k : {-pi, pi, 3.0 * pi, -3.0 * pi, 0.5, 7.0, -7.0, 100.0, -100.0, 1e-300}) {
    const double w = wrap_momentum(k);
    CHECK(w >= -pi);
    CHECK(w < pi);
    CHECK(torus_gap(w, k) < 1e-12);
  }
}
