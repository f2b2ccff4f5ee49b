#pragma once

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace latticediff {

enum class BathKind { BuiltInGaussian, Tabulated };

// User-facing bath description; beta and d come from the model.
struct BathSpec {
  BathKind kind = BathKind::BuiltInGaussian;
  double cutoff = 2.0;
  std::vector<std::pair<double, double>> table;   // (omega > 0, value), Tabulated only
  std::optional<std::array<double, 2>> normalize_at;  // scale so psi_hat(w0) = v0
};

// Effective squared form factor psi_hat(omega) >= 0.
//
// Built-in: A |w|^n exp(-w^2/L^2) / |1 - e^{-b w}| with odd n = max(3, d-2 rounded up to odd).
// Tabulated: piecewise linear through (0,0) and the table on w > 0, zero past the last node.
// Negative frequencies always follow from psi_hat(-w) = e^{-b w} psi_hat(w).
class BathProfile {
 public:
  BathProfile(BathSpec spec, double beta, int dim) : spec_(std::move(spec)), beta_(beta), dim_(dim) {
    if (!(beta_ > 0.0)) throw ConfigError("bath: beta must be positive");
    if (dim_ < 1) throw ConfigError("bath: dim must be >= 1");
    power_ = std::max(3, dim_ - 2);
    if (power_ % 2 == 0) ++power_;
    if (spec_.kind == BathKind::BuiltInGaussian) {
      if (!(spec_.cutoff > 0.0)) throw ConfigError("bath: cutoff must be positive");
    } else {
      if (spec_.table.empty()) throw ConfigError("bath: tabulated profile needs at least one point");
      std::sort(spec_.table.begin(), spec_.table.end());
      double prev = 0.0;
      for (auto [w, v] : spec_.table) {
        if (!(w > prev)) throw ConfigError("bath: table frequencies must be positive and distinct");
        if (!(v >= 0.0)) throw ConfigError("bath: table values must be non-negative");
        prev = w;
      }
    }
    if (spec_.normalize_at) {
      const double base = unscaled((*spec_.normalize_at)[0]);
      if (!(base > 0.0)) throw ConfigError("bath: cannot normalize at a zero of the profile");
      amplitude_ = (*spec_.normalize_at)[1] / base;
    }
    locate_support();
  }

  double operator()(double w) const { return amplitude_ * unscaled(w); }

  const BathSpec& spec() const { return spec_; }
  BathKind kind() const { return spec_.kind; }
  bool analytic() const { return spec_.kind == BathKind::BuiltInGaussian; }
  double beta() const { return beta_; }
  int dim() const { return dim_; }
  int power() const { return power_; }
  double amplitude() const { return amplitude_; }
  double max_value() const { return max_value_; }

  // Frequencies outside [lo, hi] carry psi_hat < 1e-16 max.
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }

  // Kinks of a tabulated profile (and 0); the built-in family is smooth.
  std::vector<double> breakpoints() const {
    std::vector<double> b{0.0};
    if (spec_.kind == BathKind::Tabulated)
      for (auto [w, v] : spec_.table) {
        if (w < hi_) b.push_back(w);
        if (-w > lo_) b.push_back(-w);
      }
    std::sort(b.begin(), b.end());
    return b;
  }

  // Time beyond which q(t) = int psi_hat e^{iwt} is below 1e-16 of its scale.
  // Set by the nearest thermal pole (2 pi / beta) and the Gaussian width. Infinite for tables.
  double decay_time() const {
    if (!analytic()) return std::numeric_limits<double>::infinity();
    const double l16 = 37.0;
    return std::max(l16 * beta_ / (2.0 * std::numbers::pi), 2.0 * std::sqrt(l16) / spec_.cutoff);
  }

 private:
  double unscaled(double w) const {
    if (w == 0.0) return 0.0;
    if (w > 0.0) return positive_side(w);
    return std::exp(beta_ * w) * positive_side(-w);
  }

  double positive_side(double w) const {
    if (spec_.kind == BathKind::BuiltInGaussian) {
      const double lam = spec_.cutoff;
      return std::pow(w, power_) * std::exp(-(w * w) / (lam * lam)) / -std::expm1(-beta_ * w);
    }
    double w0 = 0.0, v0 = 0.0;
    for (auto [w1, v1] : spec_.table) {
      if (w <= w1) return v0 + (v1 - v0) * (w - w0) / (w1 - w0);
      w0 = w1;
      v0 = v1;
    }
    return 0.0;
  }

  void locate_support() {
    if (spec_.kind == BathKind::Tabulated) {
      hi_ = spec_.table.back().first;
      double mx = 0.0;
      for (auto [w, v] : spec_.table) mx = std::max(mx, v);
      max_value_ = amplitude_ * mx;
      lo_ = -hi_;
      // the KMS factor can push the negative side far below the threshold
      double w = hi_;
      while (w > 0.0 && (*this)(-w) < 1e-16 * max_value_) w -= hi_ / 4096.0;
      lo_ = -std::min(hi_, w + hi_ / 4096.0);
      return;
    }
    const double step = spec_.cutoff / 256.0;
    double mx = 0.0;
    for (double w = step; w < 12.0 * spec_.cutoff; w += step) mx = std::max(mx, (*this)(w));
    max_value_ = mx;
    const double thr = 1e-16 * mx;
    double w = 12.0 * spec_.cutoff;
    while ((*this)(w) > thr) w *= 1.25;
    while (w > step && (*this)(w - step) < thr) w -= step;
    hi_ = w;
    double u = hi_;
    while (u > step && (*this)(-(u - step)) < thr) u -= step;
    lo_ = -u;
  }

  BathSpec spec_;
  double beta_;
  int dim_;
  int power_ = 3;
  double amplitude_ = 1.0;
  double max_value_ = 0.0;
  double lo_ = 0.0, hi_ = 0.0;
};

}  // namespace latticediff
