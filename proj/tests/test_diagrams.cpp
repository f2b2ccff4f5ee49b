#include "common.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

using namespace latticediff;
using namespace latticediff::diagrams;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
Shape shape(int n, std::vector<std::pair<int, int>> one_based) {
  Shape s;
  s.n = n;
  for (auto [u, v] : one_based) s.pairs.emplace_back(u - 1, v - 1);
  return s;
}

// Independent oracle: a pairing splits if some prefix 0..c is a union of whole pairs.
bool splits(const Shape& s) {
  for (int c = 0; c < 2 * s.n - 1; ++c) {
    bool crossed = false;
    for (auto [u, v] : s.pairs) crossed = crossed || (u <= c && v > c);
    if (!crossed) return true;
  }
  return false;
}

// The staircase (1 3)(2 5)(4 7)...(2n-2 2n): each arc overlaps only its neighbours.
Shape staircase(int n) {
  std::vector<std::pair<int, int>> p{{1, 3}};
  for (int i = 1; i < n - 1; ++i) p.emplace_back(2 * i, 2 * i + 3);
  p.emplace_back(2 * n - 2, 2 * n);
  Shape s = shape(n, p);
  std::sort(s.pairs.begin(), s.pairs.end());
  return s;
}
}  // namespace

TEST_CASE("pairing counts are double factorials", "[diagrams]") {
  const std::size_t expect[] = {1, 3, 15, 105, 945};
  for (int n = 1; n <= 5; ++n) {
    const auto all = enumerate_pairings(n);
    CHECK(all.size() == expect[n - 1]);
    std::set<std::string> seen;
    for (const auto& s : all) {
      seen.insert(s.str());
      std::vector<int> hit(std::size_t(2 * n), 0);
      for (auto [u, v] : s.pairs) {
        CHECK(u < v);
        ++hit[std::size_t(u)];
        ++hit[std::size_t(v)];
      }
      CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    }
    CHECK(seen.size() == all.size());
  }
  CHECK_THROWS_AS(enumerate_pairings(9), ConfigError);
  CHECK_THROWS_AS(enumerate_pairings(0), ConfigError);
}

TEST_CASE("classification of the n = 2 shapes", "[diagrams]") {
  CHECK(classify(shape(2, {{1, 3}, {2, 4}})) == Class::MinimallyIrreducible);
  CHECK(classify(shape(2, {{1, 2}, {3, 4}})) == Class::Reducible);
  CHECK(classify(shape(2, {{1, 4}, {2, 3}})) == Class::Irreducible);
  CHECK(shape(2, {{1, 3}, {2, 4}}).str() == "(1 3)(2 4)");
  CHECK(irreducible_shapes(2).size() == 2);
}

TEST_CASE("irreducible counts match a brute-force cut search", "[diagrams]") {
  // regression values from the cut search: 1, 2, 10, 74, 706
  const std::size_t pinned[] = {1, 2, 10, 74, 706};
  for (int n = 1; n <= 5; ++n) {
    std::size_t brute = 0, ours = 0;
    for (const auto& s : enumerate_pairings(n)) {
      const bool irr = !splits(s);
      brute += irr;
      const Class c = classify(s);
      ours += c != Class::Reducible;
      CHECK(irr == (c != Class::Reducible));
    }
    CHECK(brute == pinned[n - 1]);
    CHECK(ours == brute);
  }
}

TEST_CASE("exactly one minimally irreducible shape per n", "[diagrams]") {
  for (int n = 2; n <= 7; ++n) {
    const auto mir = irreducible_shapes(n, true);
    REQUIRE(mir.size() == 1);
    CHECK(mir[0].str() == staircase(n).str());
  }
}

TEST_CASE("timed diagrams: shape, endpoints, rescaling", "[diagrams]") {
  const Diagram dg{{{0.0, 2.0}, {1.0, 3.0}}};
  CHECK(shape_of(dg).str() == "(1 3)(2 4)");
  CHECK(classify(dg, 0.0, 3.0) == Class::MinimallyIrreducible);
  // extreme times off the interval ends
  CHECK(classify(dg, -1.0, 3.0) == Class::Reducible);
  CHECK(classify(dg, 0.0, 4.0) == Class::Reducible);

  const Diagram nested{{{0.0, 5.0}, {1.0, 2.0}, {3.0, 4.0}}};
  for (double c : {0.001, 0.37, 1.0, 250.0}) {
    Diagram a = dg, b = nested;
    for (auto& p : a.pairs) p = {c * p.first, c * p.second};
    for (auto& p : b.pairs) p = {c * p.first, c * p.second};
    CHECK(classify(a, 0.0, 3.0 * c) == Class::MinimallyIrreducible);
    CHECK(classify(b, 0.0, 5.0 * c) == Class::Irreducible);
  }
  CHECK(is_long(dg, 2.0));
  CHECK_FALSE(is_long(nested, 2.0));
  CHECK(is_short(nested, 5.0));
  CHECK_FALSE(is_short(nested, 4.9));
  CHECK_THROWS_AS(shape_of(Diagram{{{0.0, 1.0}, {1.0, 2.0}}}), ConfigError);
  CHECK_THROWS_AS(shape_of(Diagram{{{1.0, 0.5}}}), ConfigError);
}

TEST_CASE("unconstrained sum against the closed form", "[diagrams]") {
  // k(s) = c e^{-s}: each order is K^n / n! with K = int_0^t (t - s) k(s) ds = c (t - 1 + e^{-t})
  const double c = 0.3, t = 2.0;
  const Kernel k = [&](double s) { return c * std::exp(-s); };
  const auto r = integrate_unconstrained(k, t, 3, 200000, 5);
  const double big_k = c * (t - 1.0 + std::exp(-t));
  double fact = 1.0;
  for (int n = 1; n <= 3; ++n) {
    fact *= n;
    const double exact = std::pow(big_k, n) / fact;
    CHECK(std::abs(r.per_n[std::size_t(n - 1)].value - exact) < 4.0 * r.per_n[std::size_t(n - 1)].se);
  }
  CHECK_THAT(r.norm_k, WithinRel(c * (1.0 - std::exp(-t)), 1e-12));

  const auto zero = integrate_unconstrained([](double) { return 0.0; }, t, 3, 1000, 1);
  CHECK(zero.total.value == 0.0);
  CHECK(zero.pass);
}

TEST_CASE("unconstrained bound at c = 0.1, t = 5", "[diagrams]") {
  const Kernel k = [](double s) { return 0.1 * std::exp(-s); };
  const auto r = integrate_unconstrained(k, 5.0, 6, 100000, 9);
  CHECK_THAT(r.bound, WithinRel(std::expm1(5.0 * 0.1 * (1.0 - std::exp(-5.0))), 1e-12));
  CHECK(r.pass);
  CHECK(r.total.value <= r.bound + 3.0 * r.total.se);
}

TEST_CASE("Monte Carlo error falls like 1 / sqrt(N)", "[diagrams]") {
  const Kernel k = [](double s) { return 0.2 * std::exp(-s); };
  std::vector<double> lx, ly;
  for (std::size_t n : {1000u, 10000u, 100000u, 1000000u}) {
    const auto r = integrate_unconstrained(k, 3.0, 2, n, 21);
    lx.push_back(std::log(double(n)));
    ly.push_back(std::log(r.total.se));
  }
  const double mx = (lx[0] + lx[1] + lx[2] + lx[3]) / 4.0, my = (ly[0] + ly[1] + ly[2] + ly[3]) / 4.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  CHECK_THAT(sxy / sxx, WithinAbs(-0.5, 0.05));
}

TEST_CASE("Laplace-domain bounds for k = 0.05 e^{-t}", "[diagrams]") {
  const Kernel k = [](double s) { return 0.05 * std::exp(-s); };
  const auto rep = check_lemma_D1(k, 0.0, 4, 200000, 3);
  CHECK_THAT(rep.norm_k, WithinRel(0.05, 1e-10));
  CHECK_THAT(rep.norm_teat, WithinRel(0.05, 1e-10));
  // with a~ = 0.05: int e^{a~ t} k = 0.05 / 0.95, int t e^{a~ t} k = 0.05 / 0.95^2
  CHECK_THAT(rep.norm_eat_t, WithinRel(0.05 / 0.95, 1e-10));
  CHECK_THAT(rep.norm_teat_t, WithinRel(0.05 / (0.95 * 0.95), 1e-10));
  CHECK_THAT(rep.mir.bound, WithinRel(0.05 / 0.95, 1e-10));
  // the n = 1 term is int e^{at} k exactly
  CHECK(std::abs(rep.ir_n[0].value - 0.05) < 4.0 * rep.ir_n[0].se);
  CHECK_THAT(rep.n1_exact, WithinRel(0.05, 1e-10));
  CHECK(rep.ir_shape_count == std::vector<int>{1, 2, 10, 74});
  CHECK(rep.mir.pass);
  CHECK(rep.ir.pass);
  CHECK(rep.ir_two.pass);
  CHECK(rep.ratio.pass);
  CHECK(rep.pass);
}

TEST_CASE("Laplace weights at n = 2 against nested quadrature", "[diagrams]") {
  // mir shape (1 3)(2 4), times 0 < s1 < s2 < s3 with gaps g1, g2, g3:
  // int e^{a(g1+g2+g3)} k(g1+g2) k(g2+g3) = c^2 / ((1-a)^2 (2-a)) for k = c e^{-t}
  const double c = 0.05, a = 0.2;
  const Kernel k = [&](double s) { return c * std::exp(-s); };
  const double exact = c * c / ((1.0 - a) * (2.0 - a) * (1.0 - a));
  const auto rep = check_lemma_D1(k, a, 2, 400000, 8);
  CHECK(std::abs(rep.mir_n[1].value - exact) < 4.0 * rep.mir_n[1].se);
}

TEST_CASE("norm preconditions are enforced", "[diagrams]") {
  const Kernel big = [](double s) { return 2.0 * std::exp(-s); };
  CHECK_THROWS_WITH(check_lemma_D1(big, 0.0, 3, 100, 1), Catch::Matchers::StartsWith("precondition-violated"));
  const Kernel k = [](double s) { return 0.05 * std::exp(-s); };
  CHECK_THROWS_AS(check_lemma_D1(k, 0.0, 9, 100, 1), ConfigError);
  CHECK_THROWS_AS(check_lemma_D1(k, -1.0, 2, 100, 1), ConfigError);
}
