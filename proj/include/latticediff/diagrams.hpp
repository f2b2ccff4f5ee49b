#pragma once

#include "error.hpp"
#include "kmc.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latticediff::diagrams {

// Pairing of the positions 0..2n-1; pairs (u, v) with u < v, sorted by u.
struct Shape {
  int n = 0;
  std::vector<std::pair<int, int>> pairs;

  // 1-based, e.g. "(1 3)(2 4)"
  std::string str() const {
    std::string s;
    for (auto [u, v] : pairs) s += "(" + std::to_string(u + 1) + " " + std::to_string(v + 1) + ")";
    return s;
  }
};

inline std::vector<Shape> enumerate_pairings(int n) {
  if (n < 1) throw ConfigError("diagrams: n must be >= 1");
  if (n > 8) throw ConfigError("diagrams: n > 8 rejected (the count grows like (2n-1)!!)");
  std::vector<Shape> out;
  std::vector<int> partner(std::size_t(2 * n), -1);
  std::function<void()> rec = [&] {
    int first = -1;
    for (int i = 0; i < 2 * n; ++i)
      if (partner[std::size_t(i)] < 0) {
        first = i;
        break;
      }
    if (first < 0) {
      Shape s;
      s.n = n;
      for (int i = 0; i < 2 * n; ++i)
        if (partner[std::size_t(i)] > i) s.pairs.emplace_back(i, partner[std::size_t(i)]);
      out.push_back(std::move(s));
      return;
    }
    for (int j = first + 1; j < 2 * n; ++j) {
      if (partner[std::size_t(j)] >= 0) continue;
      partner[std::size_t(first)] = j;
      partner[std::size_t(j)] = first;
      rec();
      partner[std::size_t(first)] = partner[std::size_t(j)] = -1;
    }
  };
  rec();
  return out;
}

enum class Class { Reducible, Irreducible, MinimallyIrreducible };

inline const char* class_name(Class c) {
  switch (c) {
    case Class::Reducible: return "reducible";
    case Class::Irreducible: return "irreducible";
    default: return "minimally_irreducible";
  }
}

// Whether the diagram's extreme times sit on the interval ends.
struct EndpointFlags {
  bool left = true;
  bool right = true;
};

// Union of [u, v] is connected and reaches from lo to hi.
inline bool covers(const std::vector<std::pair<int, int>>& pairs, int lo, int hi) {
  if (pairs.empty()) return false;
  bool has_lo = false, has_hi = false;
  for (auto [u, v] : pairs) {
    has_lo = has_lo || u == lo;
    has_hi = has_hi || v == hi;
  }
  if (!has_lo || !has_hi) return false;
  for (int cut = lo; cut < hi; ++cut) {
    bool bridged = false;
    for (auto [u, v] : pairs) bridged = bridged || (u <= cut && cut < v);
    if (!bridged) return false;
  }
  return true;
}

// Removing more pairs only loses coverage, so testing single removals decides minimality.
inline Class classify(const Shape& s, EndpointFlags ends = {}) {
  if (!ends.left || !ends.right) return Class::Reducible;
  const int lo = 0, hi = 2 * s.n - 1;
  if (!covers(s.pairs, lo, hi)) return Class::Reducible;
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    auto rest = s.pairs;
    rest.erase(rest.begin() + long(i));
    if (covers(rest, lo, hi)) return Class::Irreducible;
  }
  return Class::MinimallyIrreducible;
}

// ------------------------------------------------------------- timed diagrams

struct Diagram {
  std::vector<std::pair<double, double>> pairs;  // (u_i, v_i)
};

inline Shape shape_of(const Diagram& dg) {
  std::vector<std::pair<double, int>> times;
  for (std::size_t i = 0; i < dg.pairs.size(); ++i) {
    if (!(dg.pairs[i].first < dg.pairs[i].second)) throw ConfigError("diagram: need u < v in every pair");
    times.emplace_back(dg.pairs[i].first, int(i));
    times.emplace_back(dg.pairs[i].second, int(i));
  }
  std::sort(times.begin(), times.end());
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i].first == times[i - 1].first) throw ConfigError("diagram: two times coincide");
  std::vector<int> first(dg.pairs.size(), -1);
  Shape s;
  s.n = int(dg.pairs.size());
  for (std::size_t pos = 0; pos < times.size(); ++pos) {
    const int id = times[pos].second;
    if (first[std::size_t(id)] < 0)
      first[std::size_t(id)] = int(pos);
    else
      s.pairs.emplace_back(first[std::size_t(id)], int(pos));
  }
  std::sort(s.pairs.begin(), s.pairs.end());
  return s;
}

inline Class classify(const Diagram& dg, double lo, double hi) {
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  for (auto [u, v] : dg.pairs) {
    tmin = std::min(tmin, u);
    tmax = std::max(tmax, v);
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(hi - lo));
  return classify(shape_of(dg), {std::abs(tmin - lo) <= tol, std::abs(tmax - hi) <= tol});
}

// every pair at least tau long / at most tau long
inline bool is_long(const Diagram& dg, double tau) {
  return std::all_of(dg.pairs.begin(), dg.pairs.end(), [&](auto p) { return p.second - p.first >= tau; });
}
inline bool is_short(const Diagram& dg, double tau) {
  return std::all_of(dg.pairs.begin(), dg.pairs.end(), [&](auto p) { return p.second - p.first <= tau; });
}

inline std::vector<Shape> irreducible_shapes(int n, bool minimal_only = false) {
  std::vector<Shape> out;
  for (auto& s : enumerate_pairings(n)) {
    const Class c = classify(s);
    if (c == Class::MinimallyIrreducible || (!minimal_only && c == Class::Irreducible)) out.push_back(std::move(s));
  }
  return out;
}

// -------------------------------------------------------------------- integrals

using Kernel = std::function<double(double)>;

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct UnconstrainedResult {
  std::vector<Estimate> per_n;  // index n-1
  Estimate total;
  double norm_k = 0.0;          // int_0^t k
  double bound = 0.0;           // e^{t ||k||} - 1
  bool pass = false;
};

inline double integrate_finite(const Kernel& f, double a, double b) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

inline double integrate_half_line(const Kernel& f) {
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

// Sum over n <= n_max of the integral of prod k(v_i - u_i) over 0 < u_1 < ... < u_n < t, u_i < v_i < t.
// u uniform on the ordered simplex, each v_i uniform on (u_i, t).
inline UnconstrainedResult integrate_unconstrained(const Kernel& k, double t, int n_max, std::size_t samples,
                                                   std::uint64_t seed) {
  UnconstrainedResult res;
  kmc::Rng rng(seed, 0xd1a9);
  double var_total = 0.0;
  double fact = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    fact *= n;
    double s = 0.0, s2 = 0.0;
    std::vector<double> u(static_cast<std::size_t>(n));
    for (std::size_t m = 0; m < samples; ++m) {
      for (auto& x : u) x = t * rng.uniform();
      double w = std::pow(t, n) / fact;
      for (double ui : u) {
        const double v = ui + (t - ui) * rng.uniform();
        w *= (t - ui) * k(v - ui);
      }
      s += w;
      s2 += w * w;
    }
    const double mean = s / double(samples);
    const double var = std::max(0.0, s2 / double(samples) - mean * mean);
    res.per_n.push_back({mean, std::sqrt(var / double(samples))});
    res.total.value += mean;
    var_total += var / double(samples);
  }
  res.total.se = std::sqrt(var_total);
  res.norm_k = integrate_finite(k, 0.0, t);
  res.bound = std::expm1(t * res.norm_k);
  res.pass = res.total.value <= res.bound + 3.0 * res.total.se;
  return res;
}

struct BoundCheck {
  Estimate estimate;
  double bound = 0.0;
  bool pass = false;
};

struct BoundReport {
  double a = 0.0;
  double a_tilde = 0.0;
  double norm_k = 0.0;       // ||k||_1
  double norm_eat = 0.0;     // ||e^{at} k||_1
  double norm_teat = 0.0;    // ||t e^{at} k||_1
  double norm_eat_t = 0.0;   // with a~
  double norm_teat_t = 0.0;
  double proposal_rate = 0.0;
  std::vector<Estimate> mir_n;
  std::vector<Estimate> ir_n;
  std::vector<int> ir_shape_count;
  BoundCheck mir;
  BoundCheck ir;
  BoundCheck ir_two;     // |sigma| >= 2
  BoundCheck ratio;      // ir_two / ir against ||t e^{a~t} k||_1
  double n1_exact = 0.0; // int e^{at} k, the n = 1 term
  bool pass = false;
};

// Laplace-domain integral of K(sigma) over the given shapes with n pairs, first time pinned at 0
// and last at t. Gaps between consecutive times are drawn Exp(rate); the shape uniformly.
inline Estimate laplace_shapes(const Kernel& k, double a, const std::vector<Shape>& shapes, double rate,
                               std::size_t samples, kmc::Rng& rng) {
  const int n = shapes.front().n;
  const int gaps = 2 * n - 1;
  std::vector<double> pos(std::size_t(2 * n));
  const double count = double(shapes.size());
  double s = 0.0, s2 = 0.0;
  for (std::size_t m = 0; m < samples; ++m) {
    const Shape& sh = shapes.size() == 1 ? shapes[0] : shapes[std::min(shapes.size() - 1, std::size_t(rng.uniform() * count))];
    pos[0] = 0.0;
    double log_w = 0.0;
    for (int g = 1; g <= gaps; ++g) {
      const double delta = rng.exponential(rate);
      pos[std::size_t(g)] = pos[std::size_t(g - 1)] + delta;
      log_w += (a + rate) * delta;
    }
    double w = std::exp(log_w - gaps * std::log(rate)) * count;
    for (auto [u, v] : sh.pairs) w *= k(pos[std::size_t(v)] - pos[std::size_t(u)]);
    s += w;
    s2 += w * w;
  }
  const double mean = s / double(samples);
  const double var = std::max(0.0, s2 / double(samples) - mean * mean);
  return {mean, std::sqrt(var / double(samples))};
}

inline BoundReport check_lemma_D1(const Kernel& k, double a, int n_max, std::size_t samples, std::uint64_t seed) {
  if (a < 0.0) throw ConfigError("diagrams: a must be >= 0");
  if (n_max < 1 || n_max > 8) throw ConfigError("diagrams: n_max must lie in [1, 8]");
  BoundReport rep;
  rep.a = a;
  // t^m e^{aa t} |k(t)|; a vanishing kernel value wins over an overflowing exponential
  auto weighted = [&](double aa, int m) {
    try {
      return integrate_half_line([&, aa, m](double t) {
        const double kv = std::abs(k(t));
        return kv == 0.0 ? 0.0 : std::pow(t, m) * std::exp(aa * t) * kv;
      });
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  rep.norm_k = weighted(0.0, 0);
  rep.a_tilde = a + rep.norm_k;
  rep.norm_eat = weighted(a, 0);
  rep.norm_teat = weighted(a, 1);
  rep.norm_eat_t = weighted(rep.a_tilde, 0);
  rep.norm_teat_t = weighted(rep.a_tilde, 1);
  if (!(rep.norm_teat < 1.0) || !(rep.norm_teat_t < 1.0) || !std::isfinite(rep.norm_teat_t))
    throw ConfigError("precondition-violated: need ||t e^{at} k||_1 < 1 and ||t e^{(a+||k||)t} k||_1 < 1");
  rep.n1_exact = integrate_half_line([&](double t) {
    const double kv = k(t);
    return kv == 0.0 ? 0.0 : std::exp(a * t) * kv;
  });
  // e^{at} k decays like e^{-c t} with c ~ ||e^{at}k|| / ||t e^{at}k||; matching it flattens the weights
  rep.proposal_rate = rep.norm_eat / rep.norm_teat;

  kmc::Rng rng(seed, 0xd1);
  double mir = 0, mir_var = 0, ir = 0, ir_var = 0, ir2 = 0, ir2_var = 0;
  for (int n = 1; n <= n_max; ++n) {
    std::vector<Shape> mirs, irs;
    if (n == 1) {
      Shape s;
      s.n = 1;
      s.pairs = {{0, 1}};
      mirs = irs = {s};
    } else {
      mirs = irreducible_shapes(n, true);
      irs = irreducible_shapes(n, false);
    }
    rep.ir_shape_count.push_back(int(irs.size()));
    const Estimate em = laplace_shapes(k, a, mirs, rep.proposal_rate, samples, rng);
    const Estimate ei = n == 1 ? em : laplace_shapes(k, a, irs, rep.proposal_rate, samples, rng);
    rep.mir_n.push_back(em);
    rep.ir_n.push_back(ei);
    mir += em.value;
    mir_var += em.se * em.se;
    ir += ei.value;
    ir_var += ei.se * ei.se;
    if (n >= 2) {
      ir2 += ei.value;
      ir2_var += ei.se * ei.se;
    }
  }
  const double one_minus = 1.0 - rep.norm_teat_t;
  rep.mir = {{mir, std::sqrt(mir_var)}, rep.norm_eat / (1.0 - rep.norm_teat), false};
  rep.ir = {{ir, std::sqrt(ir_var)}, 2.0 * rep.norm_eat_t / one_minus, false};
  rep.ir_two = {{ir2, std::sqrt(ir2_var)}, 2.0 * rep.norm_eat_t * rep.norm_teat_t / one_minus, false};
  const double ir1 = ir - ir2;
  const double se1 = rep.ir_n[0].se;
  const double ratio = ir > 0 ? ir2 / ir : 0.0;
  const double ratio_se = ir > 0 ? std::sqrt(std::pow(ir1 * std::sqrt(ir2_var), 2) + std::pow(ir2 * se1, 2)) / (ir * ir) : 0.0;
  rep.ratio = {{ratio, ratio_se}, rep.norm_teat_t, false};
  for (BoundCheck* b : {&rep.mir, &rep.ir, &rep.ir_two, &rep.ratio})
    b->pass = b->estimate.value <= b->bound + 3.0 * b->estimate.se;
  rep.pass = rep.mir.pass && rep.ir.pass && rep.ir_two.pass && rep.ratio.pass;
  return rep;
}

}  // namespace latticediff::diagrams
