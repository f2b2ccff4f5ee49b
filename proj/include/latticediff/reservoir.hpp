#pragma once

#include "bath.hpp"
#include "error.hpp"
#include "model.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace latticediff::reservoir {

using cplx = std::complex<double>;

struct QuadSpec {
  int eta_order = 64;
  double rel_tol = 1e-8;
  bool verify = false;  // recompute with doubled nodes and compare
};

inline double psi_hat(const BathProfile& b, double w) { return b(w); }

// Nodes for int dw F(w) where F oscillates like e^{i w tau} with |tau| <= span.
// Analytic profiles: trapezoid, exponentially accurate once the aliasing period
// 2 pi / h exceeds span plus twice the decay time of q. Tables: Gauss-Legendre panels
// between kinks, each panel spanning at most half a period.
inline quad::Rule omega_rule(const BathProfile& b, double span, double refine = 1.0) {
  quad::Rule rule;
  const double lo = b.support_lo(), hi = b.support_hi();
  if (b.analytic()) {
    const double period = std::abs(span) + 2.0 * b.decay_time() + 1.0;
    const double h = std::min(2.0 * std::numbers::pi / period, b.spec().cutoff / 4.0) / refine;
    const long jlo = long(std::ceil(lo / h)), jhi = long(std::floor(hi / h));
    rule.nodes.reserve(std::size_t(jhi - jlo + 1));
    for (long j = jlo; j <= jhi; ++j) {
      if (j == 0) continue;  // psi_hat(0) = 0
      rule.nodes.push_back(double(j) * h);
      rule.weights.push_back(h);
    }
    return rule;
  }
  static const quad::Rule gl = quad::gauss_legendre(16);
  std::vector<double> cuts = b.breakpoints();
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], c = cuts[i + 1];
    if (c <= lo || a >= hi) continue;
    const int m = std::max(1, int(std::ceil((c - a) * (std::abs(span) + 1.0) / std::numbers::pi * refine)));
    for (int p = 0; p < m; ++p) quad::append_mapped(gl, a + (c - a) * p / m, a + (c - a) * (p + 1) / m, rule);
  }
  return rule;
}

// psi(x,t) = int dw psi_hat(w) e^{iwt} S_d(w|x|), S_d the Fourier transform of the unit sphere.
// Writing S_d through its eta = s.x/|x| marginal gives the reduced form
// int_{-1}^{1} deta a(eta) q(t + eta |x|) with a(eta) = |S^{d-2}| (1-eta^2)^{(d-3)/2}.
class Correlation {
 public:
  explicit Correlation(const BathProfile& b, QuadSpec q = {})
      : bath_(b), quad_(q), sphere_(b.dim(), q.eta_order), sphere2_(b.dim(), 2 * q.eta_order) {
    const auto rule = omega_rule(b, 0.0, 2.0);
    double s = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) s += rule.weights[j] * b(rule.nodes[j]);
    mass_ = s;
  }

  const BathProfile& bath() const { return bath_; }
  const QuadSpec& spec() const { return quad_; }
  // int psi_hat dw; |psi(0,0)| = |S^{d-1}| * mass.
  double mass() const { return mass_; }
  double scale() const { return quad::sphere_area(bath_.dim()) * mass_; }

  // q(tau) = int dw psi_hat(w) e^{i w tau}
  cplx q(double tau, double refine = 1.0) const {
    const auto rule = omega_rule(bath_, tau, refine);
    cplx s = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      s += rule.weights[j] * bath_(rule.nodes[j]) * std::polar(1.0, rule.nodes[j] * tau);
    return s;
  }

  // psi at one time for many radii; the omega rule is shared.
  std::vector<cplx> radial(double t, std::span<const double> radii, double refine = 1.0) const {
    double rmax = 0.0;
    for (double r : radii) rmax = std::max(rmax, std::abs(r));
    const auto rule = omega_rule(bath_, std::abs(t) + rmax, refine);
    const auto& sph = refine > 1.0 ? sphere2_ : sphere_;
    std::vector<cplx> base(rule.nodes.size());
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      base[j] = rule.weights[j] * bath_(rule.nodes[j]) * std::polar(1.0, rule.nodes[j] * t);
    std::vector<cplx> out(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const double r = std::abs(radii[i]);
      cplx s = 0.0;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) s += base[j] * sph(rule.nodes[j] * r);
      out[i] = s;
    }
    return out;
  }

  // psi at one radius for many times; the sphere factor is shared.
  std::vector<cplx> time_series(double r, std::span<const double> times, double refine = 1.0) const {
    double tmax = 0.0;
    for (double t : times) tmax = std::max(tmax, std::abs(t));
    const auto rule = omega_rule(bath_, tmax + std::abs(r), refine);
    const auto& sph = refine > 1.0 ? sphere2_ : sphere_;
    std::vector<double> base(rule.nodes.size());
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      base[j] = rule.weights[j] * bath_(rule.nodes[j]) * sph(rule.nodes[j] * r);
    std::vector<cplx> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) s += base[j] * std::polar(1.0, rule.nodes[j] * times[i]);
      out[i] = s;
    }
    return out;
  }

  cplx operator()(double r, double t) const {
    const double rr[1] = {r};
    const cplx v = radial(t, rr)[0];
    if (quad_.verify) {
      const cplx v2 = radial(t, rr, 2.0)[0];
      check_refinement(v, v2, "psi");
    }
    return v;
  }

  void check_refinement(cplx v, cplx v2, const char* what) const {
    const double tol = quad_.rel_tol * std::max(std::abs(v2), 1e-6 * scale());
    if (std::abs(v - v2) > tol)
      throw NumericError("quadrature-nonconvergence", std::string(what) + ": refinement changed the value by " +
                                                          std::to_string(std::abs(v - v2)));
  }

 private:
  BathProfile bath_;
  QuadSpec quad_;
  quad::SphereFourier sphere_;
  quad::SphereFourier sphere2_;
  double mass_ = 0.0;
};

inline cplx psi_xt(const BathProfile& b, const Eigen::VectorXd& x, double t, QuadSpec q = {}) {
  return Correlation(b, q)(x.norm(), t);
}

// ------------------------------------------------------------------ decay laws

struct DecayFit {
  double rate = 0.0;       // g_R in log|psi| ~ c - g_R t
  double intercept = 0.0;
  double r2 = 0.0;
  int samples = 0;
  double v_star = 0.0;
  bool pass = false;
  std::vector<std::string> warnings;
  std::vector<double> times;
  std::vector<double> values;  // sup of |psi| over the sampled cone
};

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const double n = double(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ssr += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

// Samples |psi| on the cone |x| <= v t for t in [5, t_max] and fits log sup|psi| linearly in t.
inline DecayFit check_subluminal_decay(const BathProfile& b, double v_star, double t_max, int t_samples = 48,
                                       int radii = 12, QuadSpec q = {}) {
  if (!(v_star >= 0.0 && v_star < 1.0)) throw ConfigError("decay check: v_star must lie in [0,1)");
  if (!(t_max > 5.0)) throw ConfigError("decay check: t_max must exceed 5");
  const Correlation psi(b, q);
  DecayFit fit;
  fit.v_star = v_star;
  if (v_star >= 0.9) fit.warnings.push_back("v_star close to the propagation speed 1: the decay rate degrades");
  const double floor = 1e-11 * psi.scale();
  std::vector<double> ts, ls;
  for (int i = 0; i < t_samples; ++i) {
    const double t = 5.0 + (t_max - 5.0) * i / (t_samples - 1);
    std::vector<double> rs(radii);
    for (int j = 0; j < radii; ++j) rs[j] = radii == 1 ? 0.0 : v_star * t * j / (radii - 1);
    const auto vals = psi.radial(t, rs);
    double sup = 0.0;
    for (auto v : vals) sup = std::max(sup, std::abs(v));
    fit.times.push_back(t);
    fit.values.push_back(sup);
    if (sup > floor) {
      ts.push_back(t);
      ls.push_back(std::log(sup));
    }
  }
  fit.samples = int(ts.size());
  if (fit.samples < 3)
    throw NumericError("fit-failure", "decay check: fewer than 3 samples above the underflow floor");
  const auto lf = least_squares(ts, ls);
  fit.rate = -lf.slope;
  fit.intercept = lf.intercept;
  fit.r2 = lf.r2;
  fit.pass = fit.rate > 0.0 && fit.r2 >= 0.95;
  return fit;
}

// sup over |x| of |psi(x,t)|; the maximum sits near the light cone |x| = t,
// so the radii are dense there and coarse elsewhere, then refined by golden section.
inline double sup_over_space(const Correlation& psi, double t, double rmax_extra = 8.0) {
  const double t_abs = std::abs(t);
  std::vector<double> rs;
  const int coarse = 16;
  const double rmax = t_abs + rmax_extra;
  for (int j = 0; j <= coarse; ++j) rs.push_back(rmax * j / coarse);
  for (double r = std::max(0.0, t_abs - 4.0); r <= t_abs + 4.0; r += 0.25) rs.push_back(r);
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  const auto vals = psi.radial(t, rs);
  std::size_t best = 0;
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (std::abs(vals[i]) > std::abs(vals[best])) best = i;
  double a = rs[best == 0 ? 0 : best - 1], c = rs[std::min(best + 1, rs.size() - 1)];
  double sup = std::abs(vals[best]);
  auto f = [&](double r) {
    const double rr[1] = {r};
    return std::abs(psi.radial(t, rr)[0]);
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - g * (c - a), x2 = a + g * (c - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 12; ++it) {
    if (f1 > f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - g * (c - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (c - a);
      f2 = f(x2);
    }
  }
  return std::max({sup, f1, f2});
}

struct IntegrabilityReport {
  double t_max = 0.0;
  double partial = 0.0;  // int_0^t_max sup_x |psi|
  double tail = 0.0;     // int_t_max^inf C (1+t)^{-gamma}
  double power = 0.0;    // fitted exponent -gamma on [t_max/2, t_max]
  double total = 0.0;
  bool pass = false;
  std::vector<double> times;
  std::vector<double> sup;
};

inline IntegrabilityReport check_time_integrability(const BathProfile& b, double t_max, double dt = 0.5,
                                                    QuadSpec q = {}) {
  const Correlation psi(b, q);
  IntegrabilityReport rep;
  rep.t_max = t_max;
  const int n = std::max(2, int(std::ceil(t_max / dt)));
  const double h = t_max / n;
  for (int i = 0; i <= n; ++i) {
    const double t = h * i;
    rep.times.push_back(t);
    rep.sup.push_back(sup_over_space(psi, t));
  }
  for (int i = 0; i < n; ++i) rep.partial += 0.5 * h * (rep.sup[i] + rep.sup[i + 1]);
  // tail from a power-law fit on the second half; samples at the quadrature floor are dropped
  std::vector<double> lx, ly;
  const double floor = 1e-13 * psi.scale();
  for (int i = 0; i <= n; ++i)
    if (rep.times[i] >= 0.5 * t_max && rep.sup[i] > floor) {
      lx.push_back(std::log1p(rep.times[i]));
      ly.push_back(std::log(rep.sup[i]));
    }
  if (lx.size() >= 3) {
    const auto lf = least_squares(lx, ly);
    rep.power = lf.slope;
    const double gamma = -lf.slope;
    rep.tail = gamma > 1.0 ? std::exp(lf.intercept) * std::pow(1.0 + t_max, 1.0 - gamma) / (gamma - 1.0)
                           : std::numeric_limits<double>::infinity();
  } else {
    // everything below the floor: the remaining mass is below it too
    rep.power = -std::numeric_limits<double>::infinity();
    rep.tail = 0.0;
  }
  rep.total = rep.partial + rep.tail;
  rep.pass = std::isfinite(rep.tail) && std::isfinite(rep.total);
  return rep;
}

// ------------------------------------------------------------------ Lamb shift

// L(a) = int_0^inf dt psi(0,t) e^{iat}, by Gauss-Legendre panels on [0,T].
class HalfLineTransform {
 public:
  HalfLineTransform(const Correlation& psi, double amax, double t_end, double refine = 1.0) : area_(quad::sphere_area(psi.bath().dim())) {
    static const quad::Rule gl = quad::gauss_legendre(16);
    const auto& b = psi.bath();
    const double wext = std::max(std::abs(b.support_lo()), std::abs(b.support_hi())) + amax;
    const int panels = std::max(1, int(std::ceil(t_end * wext / std::numbers::pi * refine)));
    quad::Rule tr;
    for (int p = 0; p < panels; ++p) quad::append_mapped(gl, t_end * p / panels, t_end * (p + 1) / panels, tr);
    const auto wr = omega_rule(b, t_end, refine);
    std::vector<double> base(wr.nodes.size());
    for (std::size_t j = 0; j < wr.nodes.size(); ++j) base[j] = wr.weights[j] * b(wr.nodes[j]);
    t_ = tr.nodes;
    wt_ = tr.weights;
    qt_.resize(t_.size());
    for (std::size_t i = 0; i < t_.size(); ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < base.size(); ++j) s += base[j] * std::polar(1.0, wr.nodes[j] * t_[i]);
      qt_[i] = s;
    }
  }

  cplx operator()(double a) const {
    cplx s = 0.0;
    for (std::size_t i = 0; i < t_.size(); ++i) s += wt_[i] * qt_[i] * std::polar(1.0, a * t_[i]);
    return area_ * s;
  }

 private:
  double area_;
  std::vector<double> t_, wt_;
  std::vector<cplx> qt_;
};

struct LambShiftEntry {
  int from = 0;
  int to = 0;
  double a = 0.0;        // levels[from] - levels[to]
  double upsilon = 0.0;  // Upsilon_from - Upsilon_to
};

struct LambShiftTable {
  std::vector<double> level;  // Upsilon_e, the diagonal of Upsilon in the Y basis
  std::vector<LambShiftEntry> entries;

  double for_pair(int from, int to) const {
    for (const auto& e : entries)
      if (e.from == from && e.to == to) return e.upsilon;
    return 0.0;
  }
};

// Im L(a) for each requested a. The horizon T is doubled until two runs agree.
inline std::vector<double> lamb_integrals(const BathProfile& b, const std::vector<double>& as, double tol = 1e-10) {
  const Correlation psi(b);
  double amax = 0.0;
  for (double a : as) amax = std::max(amax, std::abs(a));
  double t_end = b.analytic() ? b.decay_time() + 2.0 : 64.0;
  const double t_cap = b.analytic() ? 8.0 * t_end : 4096.0;
  const double scale = quad::sphere_area(b.dim()) * psi.mass();
  std::vector<double> prev;
  for (;;) {
    const HalfLineTransform lt(psi, amax, t_end);
    const HalfLineTransform lt2(psi, amax, 2.0 * t_end, 1.5);
    std::vector<double> cur, cur2;
    double diff = 0.0;
    for (double a : as) {
      cur.push_back(lt(a).imag());
      cur2.push_back(lt2(a).imag());
      diff = std::max(diff, std::abs(cur.back() - cur2.back()));
    }
    if (diff <= tol * scale) return cur2;
    t_end *= 2.0;
    if (t_end > t_cap)
      throw NumericError("quadrature-nonconvergence",
                         "lamb shift: half-line integral did not settle (profile tail too slow)");
  }
}

// Upsilon_{e'} = sum_e |<e', W e>|^2 Im L(e - e').
inline LambShiftTable lamb_shift(const BathProfile& b, const SpinSystem& spin) {
  const int n = spin.size();
  std::vector<double> as;
  for (int e = 0; e < n; ++e)
    for (int f = 0; f < n; ++f) as.push_back(spin.levels[e] - spin.levels[f]);
  const auto im = lamb_integrals(b, as);
  LambShiftTable out;
  out.level.assign(n, 0.0);
  for (int f = 0; f < n; ++f)
    for (int e = 0; e < n; ++e) out.level[f] += spin.coupling_sq(e, f) * im[std::size_t(e * n + f)];
  for (int e = 0; e < n; ++e)
    for (int f = 0; f < n; ++f)
      if (e != f) out.entries.push_back({e, f, spin.levels[e] - spin.levels[f], out.level[e] - out.level[f]});
  return out;
}

// ---------------------------------------------------------- gain coefficient

// int_R dt e^{-iat} psi(x,t) by the trapezoid rule in t. With psi built from e^{+iwt} this
// picks out psi_hat(a); the closed form is 2 pi psi_hat(a) S_d(a|x|).
inline cplx gain_coefficient_position(const BathProfile& b, double a, const Eigen::VectorXd& x, QuadSpec q = {}) {
  if (!b.analytic())
    throw NumericError("quadrature-nonconvergence",
                       "gain coefficient: the time integral needs an analytic profile (tabulated tails are algebraic)");
  const Correlation psi(b, q);
  const double r = x.norm();
  auto run = [&](double refine) {
    const double t_end = (r + b.decay_time() + 2.0) * (refine > 1.0 ? 1.5 : 1.0);
    const double band = b.support_hi() - b.support_lo() + 2.0 * std::abs(a);
    const double h = 2.0 * std::numbers::pi / band / refine;
    const long m = long(std::ceil(t_end / h));
    std::vector<double> ts;
    ts.reserve(std::size_t(2 * m + 1));
    for (long j = -m; j <= m; ++j) ts.push_back(double(j) * h);
    const auto vals = psi.time_series(r, ts, refine);
    cplx s = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) s += h * vals[i] * std::polar(1.0, -a * ts[i]);
    return s;
  };
  const cplx v = run(1.0);
  const cplx v2 = run(2.0);
  if (std::abs(v - v2) > q.rel_tol * std::max(std::abs(v2), 1e-6 * 2.0 * std::numbers::pi * b.max_value() * quad::sphere_area(b.dim())))
    throw NumericError("quadrature-nonconvergence", "gain coefficient: refinement disagreement");
  return v2;
}

inline double gain_coefficient_closed_form(const BathProfile& b, double a, const Eigen::VectorXd& x) {
  return 2.0 * std::numbers::pi * b(a) * quad::SphereFourier::by_bessel(b.dim(), a * x.norm());
}

}  // namespace latticediff::reservoir
