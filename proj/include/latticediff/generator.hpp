#pragma once

#include "error.hpp"
#include "model.hpp"
#include "quadrature.hpp"
#include "reservoir.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

namespace latticediff::generator {

using cplx = std::complex<double>;

// One ordered level pair e -> e'. The rate density per unit sphere measure is
// amplitude = 2 pi psi_hat(e - e') |<e', W e>|^2; the total rate is amplitude |S^{d-1}|.
struct JumpChannel {
  int from = 0;
  int to = 0;
  double a = 0.0;  // levels[from] - levels[to]
  double amplitude = 0.0;
  double radius = 0.0;  // |a|, the momentum kick
};

struct JumpRateTable {
  int dim = 1;
  double beta = 1.0;
  std::vector<double> levels;
  std::vector<JumpChannel> channels;
  quad::SphereRule sphere;
  double sphere_area = 2.0;

  double total_rate(const JumpChannel& c) const { return c.amplitude * sphere_area; }

  const JumpChannel* find(int from, int to) const {
    for (const auto& c : channels)
      if (c.from == from && c.to == to) return &c;
    return nullptr;
  }
};

// Downward channels come from psi_hat(a), a > 0; each upward amplitude is the downward
// one times e^{-beta a}, so detailed balance holds by construction.
inline JumpRateTable build_rate_table(const ModelConfig& cfg) {
  const BathProfile bath = cfg.profile();
  JumpRateTable t;
  t.dim = cfg.dim;
  t.beta = cfg.beta;
  t.levels = cfg.spin.levels;
  t.sphere = quad::sphere_rule(cfg.dim, cfg.sphere_nodes());
  t.sphere_area = quad::sphere_area(cfg.dim);
  const int n = cfg.spin.size();
  for (int e = 0; e < n; ++e)
    for (int f = 0; f < n; ++f) {
      const double a = cfg.spin.levels[e] - cfg.spin.levels[f];
      if (!(a > 0.0)) continue;
      const double down = 2.0 * std::numbers::pi * bath(a) * cfg.spin.coupling_sq(e, f);
      const double up = 2.0 * std::numbers::pi * std::exp(-cfg.beta * a) * bath(a) * cfg.spin.coupling_sq(f, e);
      if (down > 0.0) t.channels.push_back({e, f, a, down, a});
      if (up > 0.0) t.channels.push_back({f, e, -a, up, a});
    }
  return t;
}

// j(e) = sum_{e'} 2 pi psi_hat(e - e') |S^{d-1}| |<e', W e>|^2. Zeros are allowed here.
inline std::vector<double> escape_rates_unchecked(const JumpRateTable& t) {
  std::vector<double> j(t.levels.size(), 0.0);
  for (const auto& c : t.channels) j[std::size_t(c.from)] += t.total_rate(c);
  return j;
}

inline std::vector<double> escape_rates(const JumpRateTable& t) {
  auto j = escape_rates_unchecked(t);
  for (std::size_t e = 0; e < j.size(); ++e)
    if (!(j[e] > 0.0))
      throw NumericError("zero-escape-rate", "escape rate of level " + std::to_string(e) +
                                                 " vanishes; the golden rule graph cannot be connected");
  return j;
}

// Circulant kernel: displacement (grid offsets) -> probability, sums to 1.
struct DepositKernel {
  std::vector<std::vector<int>> offsets;
  std::vector<double> weights;
};

// Targets k + radius s for each sphere node, spread on the torus grid by periodic
// multilinear interpolation. Coinciding wrapped images accumulate.
inline DepositKernel deposit_kernel(const MomentumGrid& grid, const quad::SphereRule& sphere, double radius) {
  const int d = grid.dim();
  const double h = grid.spacing();
  double wsum = 0.0;
  for (double w : sphere.weights) wsum += w;
  std::map<std::vector<int>, double> acc;
  for (std::size_t m = 0; m < sphere.nodes.size(); ++m) {
    const double wm = sphere.weights[m] / wsum;
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (int i = 0; i < d; ++i) {
      const double u = radius * sphere.nodes[m](i) / h;
      const double fl = std::floor(u);
      base[i] = int(fl);
      frac[i] = u - fl;
    }
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = wm;
      std::vector<int> off(d);
      for (int i = 0; i < d; ++i) {
        const bool up = (corner >> i) & 1;
        w *= up ? frac[i] : 1.0 - frac[i];
        off[i] = grid.wrap_index(base[i] + (up ? 1 : 0));
      }
      if (w != 0.0) acc[off] += w;
    }
  }
  DepositKernel k;
  double total = 0.0;
  for (const auto& [off, w] : acc) total += w;
  for (const auto& [off, w] : acc) {
    k.offsets.push_back(off);
    k.weights.push_back(w / total);
  }
  return k;
}

// Everything needed to build fibers M_{p,a} on the k-grid x levels.
// State index: level * N^d + k index.
class GeneratorMatrices {
 public:
  explicit GeneratorMatrices(const ModelConfig& cfg, std::optional<reservoir::LambShiftTable> lamb = std::nullopt)
      : cfg_(cfg), grid_(cfg.momentum_grid()), table_(build_rate_table(cfg)), lamb_(std::move(lamb)) {
    escape_ = escape_rates_unchecked(table_);
    assemble_m00();
    eps_.resize(Eigen::Index(grid_.size()));
    for (std::size_t i = 0; i < grid_.size(); ++i) eps_(Eigen::Index(i)) = dispersion_eval(cfg_.dispersion, grid_.k(i));
  }

  const ModelConfig& config() const { return cfg_; }
  const MomentumGrid& grid() const { return grid_; }
  const JumpRateTable& table() const { return table_; }
  const std::vector<double>& escape() const { return escape_; }
  int levels() const { return cfg_.spin.size(); }
  Eigen::Index dim() const { return Eigen::Index(grid_.size()) * levels(); }
  Eigen::Index index(int level, std::size_t k) const { return Eigen::Index(level) * Eigen::Index(grid_.size()) + Eigen::Index(k); }

  // p = 0, a = 0: real Markov generator acting on densities, columns sum to zero.
  const Eigen::MatrixXd& m00() const { return m00_; }

  // Kinetic symbol -(eps(k + p/2) - eps(k - p/2)) per grid point, times i in the fiber.
  Eigen::VectorXcd kinetic(const Eigen::VectorXcd& p) const {
    Eigen::VectorXcd out(Eigen::Index(grid_.size()));
    std::vector<cplx> kp(std::size_t(grid_.dim())), km(std::size_t(grid_.dim()));
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Eigen::VectorXd k = grid_.k(i);
      for (int a = 0; a < grid_.dim(); ++a) {
        kp[std::size_t(a)] = k(a) + 0.5 * p(a);
        km[std::size_t(a)] = k(a) - 0.5 * p(a);
      }
      const cplx de = dispersion_eval<cplx>(cfg_.dispersion, kp) - dispersion_eval<cplx>(cfg_.dispersion, km);
      out(Eigen::Index(i)) = cplx(0.0, -1.0) * de;
    }
    return out;
  }

  // M_{p,0} = G + L + K_p
  Eigen::MatrixXcd fiber(const Eigen::VectorXcd& p) const {
    Eigen::MatrixXcd m = m00_.cast<cplx>();
    const Eigen::VectorXcd kin = kinetic(p);
    for (int e = 0; e < levels(); ++e)
      for (std::size_t k = 0; k < grid_.size(); ++k) m(index(e, k), index(e, k)) += kin(Eigen::Index(k));
    return m;
  }

  Eigen::MatrixXcd fiber(const Eigen::VectorXd& p) const { return fiber(Eigen::VectorXcd(p.cast<cplx>())); }

  // a != 0 block for the pair (from, to): diagonal on the k-grid,
  // -i(Upsilon_a + eps(k+p/2) - eps(k-p/2)) - (j(from) + j(to))/2.
  Eigen::VectorXcd fiber_offdiagonal(const Eigen::VectorXcd& p, int from, int to) const {
    const double ups = lamb_ ? lamb_->for_pair(from, to) : 0.0;
    const double damp = -0.5 * (escape_[std::size_t(from)] + escape_[std::size_t(to)]);
    Eigen::VectorXcd kin = kinetic(p);
    for (Eigen::Index i = 0; i < kin.size(); ++i) kin(i) += cplx(damp, -ups);
    return kin;
  }

  // Gibbs in e times flat in k, normalized as a density: sum phi (2pi/N)^d = 1.
  Eigen::VectorXd gibbs_uniform() const {
    Eigen::VectorXd v(dim());
    double z = 0.0;
    const double e0 = cfg_.spin.levels.front();
    for (double e : cfg_.spin.levels) z += std::exp(-cfg_.beta * (e - e0));
    const double vol = std::pow(2.0 * std::numbers::pi, grid_.dim());
    for (int e = 0; e < levels(); ++e)
      for (std::size_t k = 0; k < grid_.size(); ++k)
        v(index(e, k)) = std::exp(-cfg_.beta * (cfg_.spin.levels[std::size_t(e)] - e0)) / z / vol;
    return v;
  }

  // diag(e^{beta e / 2}) over the full state space
  Eigen::VectorXd similarity() const {
    Eigen::VectorXd s(dim());
    const double e0 = cfg_.spin.levels.front();
    for (int e = 0; e < levels(); ++e)
      for (std::size_t k = 0; k < grid_.size(); ++k)
        s(index(e, k)) = std::exp(0.5 * cfg_.beta * (cfg_.spin.levels[std::size_t(e)] - e0));
    return s;
  }

  // Off-diagonal rate from (k, from) to (k', to), read off the assembled matrix.
  double rate(std::size_t k, int from, std::size_t kp, int to) const { return m00_(index(to, kp), index(from, k)); }

 private:
  void assemble_m00() {
    const Eigen::Index n = dim();
    m00_ = Eigen::MatrixXd::Zero(n, n);
    const int d = grid_.dim();
    for (const auto& c : table_.channels) {
      if (c.a < 0.0) continue;  // upward channels come from the transpose below
      const JumpChannel* up = table_.find(c.to, c.from);
      const DepositKernel ker = deposit_kernel(grid_, table_.sphere, c.radius);
      const double down_rate = table_.total_rate(c);
      const double up_rate = up ? table_.total_rate(*up) : 0.0;
      for (std::size_t k = 0; k < grid_.size(); ++k) {
        const auto mk = grid_.unflatten(k);
        std::vector<int> tgt(std::size_t(d), 0);
        for (std::size_t o = 0; o < ker.offsets.size(); ++o) {
          for (int i = 0; i < d; ++i) tgt[std::size_t(i)] = mk[std::size_t(i)] + ker.offsets[o][std::size_t(i)];
          const std::size_t kp = grid_.flatten(tgt);
          const double w = ker.weights[o];
          // (k, from) -> (k', to) and its reverse (k', to) -> (k, from)
          m00_(index(c.to, kp), index(c.from, k)) += down_rate * w;
          if (up) m00_(index(c.from, k), index(c.to, kp)) += up_rate * w;
        }
      }
    }
    // the diagonal closes each column exactly
    for (Eigen::Index col = 0; col < n; ++col) {
      double s = 0.0;
      for (Eigen::Index row = 0; row < n; ++row)
        if (row != col) s += m00_(row, col);
      m00_(col, col) = -s;
    }
  }

  ModelConfig cfg_;
  MomentumGrid grid_;
  JumpRateTable table_;
  std::optional<reservoir::LambShiftTable> lamb_;
  std::vector<double> escape_;
  Eigen::MatrixXd m00_;
  Eigen::VectorXd eps_;
};

// A_hat = e^{beta Y/2} A e^{-beta Y/2}
template <class Derived>
auto symmetrize(const Eigen::MatrixBase<Derived>& a, const Eigen::VectorXd& similarity) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat out = similarity.cast<Scalar>().asDiagonal() * a.derived();
  out = out * similarity.cwiseInverse().cast<Scalar>().asDiagonal();
  return out;
}

// --------------------------------------------------------- gain crosscheck

struct GainSample {
  double a = 0.0;
  Eigen::VectorXd x;
  double grid_value = 0.0;
  double reference = 0.0;
  double rel_error = 0.0;  // relative to the x = 0 coefficient 2 pi psi_hat(a) |S^{d-1}|
};

struct GainReport {
  int points_per_axis = 0;
  std::vector<GainSample> samples;
  double max_rel_error = 0.0;
};

// Lattice Fourier transform of the assembled gain row for the channel with Bohr frequency a,
// divided by the coupling, against the time-domain coefficient from the reservoir module.
inline GainReport gain_kernel_crosscheck(const ModelConfig& cfg, double a, const std::vector<Eigen::VectorXd>& xs,
                                         const GeneratorMatrices* prebuilt = nullptr) {
  std::optional<GeneratorMatrices> own;
  if (!prebuilt) own.emplace(cfg);
  const GeneratorMatrices& gen = prebuilt ? *prebuilt : *own;
  const auto& spin = cfg.spin;
  int from = -1, to = -1;
  for (int e = 0; e < spin.size(); ++e)
    for (int f = 0; f < spin.size(); ++f)
      if (e != f && std::abs(spin.levels[std::size_t(e)] - spin.levels[std::size_t(f)] - a) < 1e-12 &&
          spin.coupling_sq(e, f) > 0.0) {
        from = e;
        to = f;
      }
  if (from < 0) throw ConfigError("gain crosscheck: a is not a coupled Bohr frequency of the model");
  const BathProfile bath = cfg.profile();
  const auto& grid = gen.grid();
  const std::size_t k0 = grid.flatten(std::vector<int>(std::size_t(cfg.dim), grid.points_per_axis() / 2));  // k = 0
  const double scale = 2.0 * std::numbers::pi * bath(a) * quad::sphere_area(cfg.dim);
  const double wsq = spin.coupling_sq(from, to);
  GainReport rep;
  rep.points_per_axis = grid.points_per_axis();
  for (const auto& x : xs) {
    cplx s = 0.0;
    for (std::size_t kp = 0; kp < grid.size(); ++kp) {
      const double r = gen.rate(k0, from, kp, to);
      if (r == 0.0) continue;
      const Eigen::VectorXd dk = grid.k(kp) - grid.k(k0);
      s += r * std::polar(1.0, dk.dot(x));
    }
    GainSample g;
    g.a = a;
    g.x = x;
    g.grid_value = s.real() / wsq;
    g.reference = reservoir::gain_coefficient_position(bath, a, x).real();
    g.rel_error = std::abs(g.grid_value - g.reference) / scale;
    rep.max_rel_error = std::max(rep.max_rel_error, g.rel_error);
    rep.samples.push_back(g);
  }
  return rep;
}

}  // namespace latticediff::generator
