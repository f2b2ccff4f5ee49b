#pragma once

#include "bath.hpp"
#include "error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace latticediff {

// ---------------------------------------------------------------- dispersion

enum class DispersionKind { NearestNeighborLaplacian, CosineSeries };

// CosineSeries: eps(k) = sum_i sum_m c[i][m-1] (1 - cos(m k_i)).
// A single coefficient row is broadcast to every axis.
struct DispersionSpec {
  DispersionKind kind = DispersionKind::NearestNeighborLaplacian;
  std::vector<std::vector<double>> coefficients;

  const std::vector<double>& axis(std::size_t i) const {
    return coefficients.size() == 1 ? coefficients[0] : coefficients.at(i);
  }
};

// Works for real and complex momenta (complex fibers p).
template <class T>
T dispersion_eval(const DispersionSpec& spec, std::span<const T> k) {
  T e{};
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (spec.kind == DispersionKind::NearestNeighborLaplacian) {
      e += T(2.0) * (T(1.0) - std::cos(k[i]));
    } else {
      const auto& c = spec.axis(i);
      for (std::size_t m = 0; m < c.size(); ++m)
        e += T(c[m]) * (T(1.0) - std::cos(T(double(m + 1)) * k[i]));
    }
  }
  return e;
}

inline double dispersion_eval(const DispersionSpec& spec, const Eigen::VectorXd& k) {
  return dispersion_eval<double>(spec, std::span<const double>(k.data(), k.size()));
}

inline double dispersion_grad_axis(const DispersionSpec& spec, std::size_t i, double ki) {
  if (spec.kind == DispersionKind::NearestNeighborLaplacian) return 2.0 * std::sin(ki);
  const auto& c = spec.axis(i);
  double g = 0.0;
  for (std::size_t m = 0; m < c.size(); ++m) g += c[m] * double(m + 1) * std::sin(double(m + 1) * ki);
  return g;
}

inline Eigen::VectorXd dispersion_grad(const DispersionSpec& spec, const Eigen::VectorXd& k) {
  Eigen::VectorXd g(k.size());
  for (Eigen::Index i = 0; i < k.size(); ++i) g(i) = dispersion_grad_axis(spec, std::size_t(i), k(i));
  return g;
}

// --------------------------------------------------------------- spin system

// Levels in the eigenbasis of Y, couplings(e', e) = <e', W e>.
struct SpinSystem {
  std::vector<double> levels;
  Eigen::MatrixXcd couplings;

  int size() const { return int(levels.size()); }
  // |<to, W from>|^2
  double coupling_sq(int from, int to) const { return std::norm(couplings(to, from)); }
};

struct BohrFrequency {
  int from;
  int to;
  double a;  // levels[from] - levels[to]
};

inline std::vector<BohrFrequency> bohr_frequencies(const SpinSystem& s) {
  std::vector<BohrFrequency> out;
  for (int e = 0; e < s.size(); ++e)
    for (int f = 0; f < s.size(); ++f)
      if (e != f) out.push_back({e, f, s.levels[e] - s.levels[f]});
  return out;
}

// ---------------------------------------------------------------------- grid

struct GridSpec {
  int points_per_axis = 128;
  int sphere_nodes = 0;  // 0: pick by dimension
};

inline int default_sphere_nodes(int d) { return d == 1 ? 2 : d == 2 ? 32 : 64; }

// k_i = 2 pi (i - N/2) / N on each axis, row-major flattening with axis 0 slowest.
class MomentumGrid {
 public:
  MomentumGrid(int dim, int n) : d_(dim), n_(n) {
    if (n < 2 || n % 2 != 0) throw ConfigError("grid: points_per_axis must be even and >= 2");
    size_ = 1;
    for (int i = 0; i < d_; ++i) size_ *= std::size_t(n_);
  }

  int dim() const { return d_; }
  int points_per_axis() const { return n_; }
  std::size_t size() const { return size_; }
  double spacing() const { return 2.0 * std::numbers::pi / n_; }
  double cell_volume() const { return std::pow(spacing(), d_); }
  // (i - n/2) h keeps k(-i) = -k(i) exact in floating point
  double coord(int i) const { return spacing() * (i - n_ / 2); }

  std::vector<int> unflatten(std::size_t idx) const {
    std::vector<int> m(d_);
    for (int i = d_ - 1; i >= 0; --i) {
      m[i] = int(idx % std::size_t(n_));
      idx /= std::size_t(n_);
    }
    return m;
  }

  std::size_t flatten(const std::vector<int>& m) const {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) idx = idx * std::size_t(n_) + std::size_t(wrap_index(m[i]));
    return idx;
  }

  int wrap_index(int i) const { return ((i % n_) + n_) % n_; }

  Eigen::VectorXd k(std::size_t idx) const {
    const auto m = unflatten(idx);
    Eigen::VectorXd v(d_);
    for (int i = 0; i < d_; ++i) v(i) = coord(m[i]);
    return v;
  }

  // index of -k
  std::size_t negate(std::size_t idx) const {
    auto m = unflatten(idx);
    for (int& c : m) c = wrap_index(n_ - c);
    return flatten(m);
  }

 private:
  int d_;
  int n_;
  std::size_t size_ = 0;
};

// Wrap a real momentum into [-pi, pi).
inline double wrap_momentum(double k) {
  constexpr double tp = 2.0 * std::numbers::pi;
  // jumps move k by at most a few periods; fmod only for the rare far case
  if (k >= -std::numbers::pi && k < std::numbers::pi) return k;
  if (k >= std::numbers::pi && k < 3.0 * std::numbers::pi) return k - tp;
  if (k < -std::numbers::pi && k >= -3.0 * std::numbers::pi) return k + tp;
  double r = std::fmod(k + std::numbers::pi, tp);
  if (r < 0.0) r += tp;
  if (r >= tp) r -= tp;
  return r - std::numbers::pi;
}

// ---------------------------------------------------------------------- model

struct ModelConfig {
  int dim = 1;
  DispersionSpec dispersion;
  SpinSystem spin;
  double beta = 1.0;
  BathSpec bath;
  GridSpec grid;
  std::uint64_t rng_seed = 0;

  BathProfile profile() const { return BathProfile(bath, beta, dim); }
  MomentumGrid momentum_grid() const { return MomentumGrid(dim, grid.points_per_axis); }
  int sphere_nodes() const { return grid.sphere_nodes > 0 ? grid.sphere_nodes : default_sphere_nodes(dim); }
};

struct ValidationCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  std::vector<std::string> warnings;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  std::vector<std::string> failures() const {
    std::vector<std::string> f;
    for (const auto& c : checks)
      if (!c.pass) f.push_back(c.name);
    return f;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["pass"] = ok();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["warnings"] = warnings;
    return j;
  }
};

// Connected components of the Fermi golden rule graph: edge e--e' iff
// psi_hat(e'-e) |<e, W e'>|^2 != 0.
inline std::vector<int> fgr_components(const SpinSystem& spin, const BathProfile& bath) {
  const int n = spin.size();
  std::vector<int> comp(n, -1);
  int c = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const int e = stack.back();
      stack.pop_back();
      for (int f = 0; f < n; ++f) {
        if (f == e || comp[f] >= 0) continue;
        const double w = bath(spin.levels[f] - spin.levels[e]) * spin.coupling_sq(f, e);
        const double w2 = bath(spin.levels[e] - spin.levels[f]) * spin.coupling_sq(e, f);
        if (w != 0.0 || w2 != 0.0) {
          comp[f] = c;
          stack.push_back(f);
        }
      }
    }
    ++c;
  }
  return comp;
}

inline std::string short_num(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 6);
  return ec == std::errc() ? std::string(buf.data(), end) : "nan";
}

inline ValidationReport validate_model(const ModelConfig& cfg) {
  ValidationReport rep;
  auto add = [&](std::string name, bool pass, std::string detail) {
    rep.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  add("dimension", cfg.dim >= 1, "d = " + std::to_string(cfg.dim));
  add("beta_positive", cfg.beta > 0.0, "beta = " + short_num(cfg.beta));
  const bool grid_ok = cfg.grid.points_per_axis >= 2 && cfg.grid.points_per_axis % 2 == 0;
  add("grid_even", grid_ok, "points_per_axis = " + std::to_string(cfg.grid.points_per_axis));
  if (cfg.dim < 1 || !grid_ok || !(cfg.beta > 0.0)) return rep;

  const auto& disp = cfg.dispersion;
  if (disp.kind == DispersionKind::CosineSeries &&
      !(disp.coefficients.size() == 1 || int(disp.coefficients.size()) == cfg.dim)) {
    add("dispersion_shape", false, "coefficients need one row or one row per axis");
    return rep;
  }

  const MomentumGrid grid = cfg.momentum_grid();
  double asym = 0.0;
  std::vector<double> max_grad(cfg.dim, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd k = grid.k(i);
    const Eigen::VectorXd mk = grid.k(grid.negate(i));
    asym = std::max(asym, std::abs(dispersion_eval(disp, k) - dispersion_eval(disp, mk)));
    const Eigen::VectorXd g = dispersion_grad(disp, k);
    for (int a = 0; a < cfg.dim; ++a) max_grad[a] = std::max(max_grad[a], std::abs(g(a)));
  }
  add("inversion_symmetry", asym == 0.0, "max |eps(k) - eps(-k)| = " + short_num(asym));
  bool nonconst = true;
  for (double g : max_grad) nonconst = nonconst && g > 0.0;
  add("dispersion_nonconstant", nonconst, "every axis has a non-zero velocity somewhere on the grid");

  const auto& spin = cfg.spin;
  const int n = spin.size();
  bool shape = n >= 1 && spin.couplings.rows() == n && spin.couplings.cols() == n;
  add("spin_shape", shape, "n = " + std::to_string(n));
  if (!shape) return rep;

  bool sorted = true;
  for (int e = 1; e < n; ++e) sorted = sorted && spin.levels[e] > spin.levels[e - 1];
  add("levels_increasing", sorted, "levels strictly increasing");

  std::vector<double> gaps;
  for (const auto& b : bohr_frequencies(spin)) gaps.push_back(b.a);
  std::sort(gaps.begin(), gaps.end());
  bool distinct = true;
  for (std::size_t i = 1; i < gaps.size(); ++i)
    distinct = distinct && std::abs(gaps[i] - gaps[i - 1]) > 1e-12 * (1.0 + std::abs(gaps[i]));
  add("bohr_frequencies_distinct", distinct, std::to_string(gaps.size()) + " nonzero Bohr frequencies");

  const double herm = (spin.couplings - spin.couplings.adjoint()).cwiseAbs().maxCoeff();
  add("coupling_hermitian", herm <= 1e-12, "max |W - W*| = " + short_num(herm));

  // operator norm of W
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (spin.couplings + spin.couplings.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  const double wnorm = es.eigenvalues().cwiseAbs().maxCoeff();
  if (wnorm > 1.0 + 1e-12) rep.warnings.push_back("||W|| = " + short_num(wnorm) + " exceeds 1");

  try {
    const BathProfile bath = cfg.profile();
    add("psi_hat_zero_at_zero", bath(0.0) == 0.0, "psi_hat(0) = 0");
    const auto comp = fgr_components(spin, bath);
    const int ncomp = *std::max_element(comp.begin(), comp.end()) + 1;
    std::string detail = std::to_string(ncomp) + " component(s)";
    if (ncomp > 1) {
      detail += "; isolated from level 0:";
      for (int e = 0; e < n; ++e)
        if (comp[e] != comp[0]) detail += " " + std::to_string(e);
    }
    add("fgr_connected", ncomp == 1, detail);
  } catch (const ConfigError& err) {
    add("bath_profile", false, err.what());
  }

  if (cfg.dim < 4)
    rep.warnings.push_back("d < 4: the correlation decay laws are not guaranteed in this dimension");
  return rep;
}

inline void ensure_valid(const ModelConfig& cfg) {
  const auto rep = validate_model(cfg);
  if (!rep.ok()) {
    std::string msg = "model validation failed:";
    for (const auto& f : rep.failures()) msg += " " + f;
    throw ConfigError(msg);
  }
}

// ----------------------------------------------------------------------- JSON

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("config: missing key '") + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const nlohmann::json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + what + "'");
  }
}

inline Eigen::MatrixXcd parse_matrix(const nlohmann::json& j, int n) {
  // either [[re,..],..] or {"re": [[..]], "im": [[..]]}
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  auto fill = [&](const nlohmann::json& rows, bool imag) {
    if (!rows.is_array() || int(rows.size()) != n) throw ConfigError("config: couplings must be n x n");
    for (int r = 0; r < n; ++r) {
      if (!rows[r].is_array() || int(rows[r].size()) != n) throw ConfigError("config: couplings must be n x n");
      for (int c = 0; c < n; ++c) {
        const double v = get_as<double>(rows[r][c], "couplings");
        if (imag)
          m(r, c) += std::complex<double>(0.0, v);
        else
          m(r, c) += v;
      }
    }
  };
  if (j.is_object()) {
    fill(require(j, "re"), false);
    if (j.contains("im")) fill(j.at("im"), true);
  } else {
    fill(j, false);
  }
  return m;
}

}  // namespace detail

inline ModelConfig model_from_json(const nlohmann::json& j) {
  using detail::get_as;
  using detail::require;
  ModelConfig cfg;
  cfg.dim = get_as<int>(require(j, "dim"), "dim");
  if (cfg.dim < 1) throw ConfigError("config: dim must be >= 1");
  cfg.beta = get_as<double>(require(j, "beta"), "beta");
  if (!(cfg.beta > 0.0)) throw ConfigError("config: beta must be positive");
  if (j.contains("rng_seed")) cfg.rng_seed = get_as<std::uint64_t>(j.at("rng_seed"), "rng_seed");

  if (j.contains("dispersion")) {
    const auto& d = j.at("dispersion");
    const auto kind = get_as<std::string>(require(d, "kind"), "dispersion.kind");
    if (kind == "nearest_neighbor") {
      cfg.dispersion.kind = DispersionKind::NearestNeighborLaplacian;
    } else if (kind == "cosine_series") {
      cfg.dispersion.kind = DispersionKind::CosineSeries;
      const auto& c = require(d, "coefficients");
      if (!c.is_array() || c.empty()) throw ConfigError("config: dispersion.coefficients must be a non-empty list");
      if (c[0].is_array())
        cfg.dispersion.coefficients = get_as<std::vector<std::vector<double>>>(c, "dispersion.coefficients");
      else
        cfg.dispersion.coefficients = {get_as<std::vector<double>>(c, "dispersion.coefficients")};
    } else {
      throw ConfigError("config: unknown dispersion kind '" + kind + "'");
    }
  }

  const auto& s = require(j, "spin");
  cfg.spin.levels = get_as<std::vector<double>>(require(s, "levels"), "spin.levels");
  if (cfg.spin.levels.empty()) throw ConfigError("config: spin.levels must not be empty");
  cfg.spin.couplings = detail::parse_matrix(require(s, "couplings"), int(cfg.spin.levels.size()));

  const auto& b = require(j, "bath");
  const auto bkind = get_as<std::string>(require(b, "kind"), "bath.kind");
  if (bkind == "gaussian") {
    cfg.bath.kind = BathKind::BuiltInGaussian;
    if (b.contains("cutoff")) cfg.bath.cutoff = get_as<double>(b.at("cutoff"), "bath.cutoff");
  } else if (bkind == "tabulated") {
    cfg.bath.kind = BathKind::Tabulated;
    const auto rows = get_as<std::vector<std::array<double, 2>>>(require(b, "table"), "bath.table");
    for (auto r : rows) cfg.bath.table.emplace_back(r[0], r[1]);
  } else {
    throw ConfigError("config: unknown bath kind '" + bkind + "'");
  }
  if (b.contains("normalize_at"))
    cfg.bath.normalize_at = get_as<std::array<double, 2>>(b.at("normalize_at"), "bath.normalize_at");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("points_per_axis"))
      cfg.grid.points_per_axis = get_as<int>(g.at("points_per_axis"), "grid.points_per_axis");
    if (g.contains("sphere_nodes")) cfg.grid.sphere_nodes = get_as<int>(g.at("sphere_nodes"), "grid.sphere_nodes");
  }
  if (cfg.grid.points_per_axis < 2 || cfg.grid.points_per_axis % 2 != 0)
    throw ConfigError("config: grid.points_per_axis must be even and >= 2");
  return cfg;
}

inline nlohmann::json model_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["dim"] = cfg.dim;
  j["beta"] = cfg.beta;
  j["rng_seed"] = cfg.rng_seed;
  if (cfg.dispersion.kind == DispersionKind::NearestNeighborLaplacian)
    j["dispersion"] = {{"kind", "nearest_neighbor"}};
  else
    j["dispersion"] = {{"kind", "cosine_series"}, {"coefficients", cfg.dispersion.coefficients}};
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (int r = 0; r < cfg.spin.size(); ++r) {
    std::vector<double> rr, ii;
    for (int c = 0; c < cfg.spin.size(); ++c) {
      rr.push_back(cfg.spin.couplings(r, c).real());
      ii.push_back(cfg.spin.couplings(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  j["spin"] = {{"levels", cfg.spin.levels}, {"couplings", {{"re", re}, {"im", im}}}};
  nlohmann::json b;
  if (cfg.bath.kind == BathKind::BuiltInGaussian) {
    b = {{"kind", "gaussian"}, {"cutoff", cfg.bath.cutoff}};
  } else {
    nlohmann::json t = nlohmann::json::array();
    for (auto [w, v] : cfg.bath.table) t.push_back({w, v});
    b = {{"kind", "tabulated"}, {"table", t}};
  }
  if (cfg.bath.normalize_at) b["normalize_at"] = *cfg.bath.normalize_at;
  j["bath"] = b;
  j["grid"] = {{"points_per_axis", cfg.grid.points_per_axis}, {"sphere_nodes", cfg.sphere_nodes()}};
  return j;
}

inline ModelConfig load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace latticediff
