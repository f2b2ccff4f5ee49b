#pragma once

#include "error.hpp"
#include "generator.hpp"
#include "model.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace latticediff::kmc {

using cplx = std::complex<double>;

// One independent stream per (seed, trajectory). seed_seq mixing and mt19937_64 are
// fully specified by the standard, so streams are portable.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                      std::uint32_t(stream >> 32), 0x6c617474u};
    gen_.seed(seq);
  }
  // [0, 1) with 53 random bits
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  double normal() {
    // Box-Muller, one value per call; spelled out for portability of the stream
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

struct ParticleState {
  Eigen::VectorXd x;
  Eigen::VectorXd k;
  int level = 0;
  double t = 0.0;
  std::uint64_t jumps = 0;
};

// Jump law per level: target levels with cumulative probabilities, plus j(e).
class JumpProcess {
 public:
  static constexpr int max_dim = 16;

  explicit JumpProcess(const ModelConfig& cfg) : cfg_(cfg), table_(generator::build_rate_table(cfg)) {
    if (cfg.dim > max_dim) throw ConfigError("simulate: dimension above 16 is not supported");
    escape_ = generator::escape_rates_unchecked(table_);
    const int n = cfg.spin.size();
    targets_.resize(std::size_t(n));
    for (int e = 0; e < n; ++e) {
      double acc = 0.0;
      for (const auto& c : table_.channels)
        if (c.from == e) {
          acc += table_.total_rate(c);
          targets_[std::size_t(e)].push_back({c.to, c.radius, acc});
        }
      for (auto& t : targets_[std::size_t(e)]) t.cumulative /= acc;
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const generator::JumpRateTable& table() const { return table_; }
  double escape(int level) const { return escape_[std::size_t(level)]; }
  int dim() const { return cfg_.dim; }

  Eigen::VectorXd velocity(const Eigen::VectorXd& k) const { return dispersion_grad(cfg_.dispersion, k); }

  // uniform direction on S^{d-1}, written to s[0..d)
  void direction(Rng& rng, double* s) const {
    const int d = cfg_.dim;
    if (d == 1) {
      s[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else if (d == 2) {
      const double th = 2.0 * std::numbers::pi * rng.uniform();
      s[0] = std::cos(th);
      s[1] = std::sin(th);
    } else {
      double nrm = 0.0;
      do {
        nrm = 0.0;
        for (int i = 0; i < d; ++i) {
          s[i] = rng.normal();
          nrm += s[i] * s[i];
        }
      } while (nrm == 0.0);
      nrm = std::sqrt(nrm);
      for (int i = 0; i < d; ++i) s[i] /= nrm;
    }
  }

  Eigen::VectorXd direction(Rng& rng) const {
    Eigen::VectorXd s(cfg_.dim);
    direction(rng, s.data());
    return s;
  }

  // Gillespie step, never beyond t_limit. Returns the waiting time drawn (infinite without jumps).
  // Allocation free: this is the hot loop.
  double step(ParticleState& st, Rng& rng, double t_limit) const {
    const int d = cfg_.dim;
    const double j = escape_[std::size_t(st.level)];
    const double wait = j > 0.0 ? rng.exponential(j) : std::numeric_limits<double>::infinity();
    const double dt = st.t + wait >= t_limit ? t_limit - st.t : wait;
    for (int i = 0; i < d; ++i) st.x(i) += dispersion_grad_axis(cfg_.dispersion, std::size_t(i), st.k(i)) * dt;
    if (st.t + wait >= t_limit) {
      st.t = t_limit;
      return wait;
    }
    st.t += wait;
    const auto& tg = targets_[std::size_t(st.level)];
    std::size_t pick = 0;
    if (tg.size() > 1) {
      const double u = rng.uniform();
      while (pick + 1 < tg.size() && u >= tg[pick].cumulative) ++pick;
    }
    std::array<double, max_dim> s;
    direction(rng, s.data());
    for (int i = 0; i < d; ++i) st.k(i) = wrap_momentum(st.k(i) + tg[pick].radius * s[std::size_t(i)]);
    st.level = tg[pick].to;
    ++st.jumps;
    return wait;
  }

  // x = 0, k uniform, level from Gibbs
  ParticleState initial(Rng& rng) const {
    ParticleState st;
    st.x = Eigen::VectorXd::Zero(cfg_.dim);
    st.k = Eigen::VectorXd(cfg_.dim);
    for (int i = 0; i < cfg_.dim; ++i) st.k(i) = -std::numbers::pi + 2.0 * std::numbers::pi * rng.uniform();
    const auto g = gibbs();
    const double u = rng.uniform();
    double acc = 0.0;
    st.level = int(g.size()) - 1;
    for (std::size_t e = 0; e < g.size(); ++e) {
      acc += g[e];
      if (u < acc) {
        st.level = int(e);
        break;
      }
    }
    return st;
  }

  std::vector<double> gibbs() const {
    std::vector<double> g;
    double z = 0.0;
    const double e0 = cfg_.spin.levels.front();
    for (double e : cfg_.spin.levels) {
      g.push_back(std::exp(-cfg_.beta * (e - e0)));
      z += g.back();
    }
    for (double& v : g) v /= z;
    return g;
  }

 private:
  struct Target {
    int to;
    double radius;
    double cumulative;
  };
  ModelConfig cfg_;
  generator::JumpRateTable table_;
  std::vector<double> escape_;
  std::vector<std::vector<Target>> targets_;
};

inline ParticleState run_trajectory(const JumpProcess& proc, std::uint64_t seed, std::uint64_t index, double t_final) {
  Rng rng(seed, index);
  ParticleState st = proc.initial(rng);
  while (st.t < t_final) proc.step(st, rng, t_final);
  return st;
}

// ------------------------------------------------------------------ statistics

// chi-square survival function
inline double chi_square_pvalue(double stat, int dof) {
  if (dof <= 0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

// Kolmogorov distribution tail P(K > lambda), with the usual finite-n correction.
inline double ks_pvalue(double dstat, std::size_t n) {
  const double sn = std::sqrt(double(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * dstat;
  if (lam < 1e-3) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    s += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct CgfProbe {
  Eigen::VectorXd p;
  cplx mean;        // E[e^{-i p.x}]
  double mean_se = 0.0;
  cplx cgf;         // log(mean) / t
  double cgf_se = 0.0;
};

struct EnsembleStats {
  std::size_t n_traj = 0;
  double t_final = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t total_jumps = 0;
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_x_se;
  Eigen::MatrixXd cov_x;
  Eigen::MatrixXd D;     // cov_x / t_final
  Eigen::MatrixXd D_se;
  std::vector<std::uint64_t> level_hist;
  std::vector<double> gibbs;
  double chi_square = 0.0;
  double chi_square_p = 1.0;
  int k_bins = 32;
  std::vector<std::vector<std::uint64_t>> k_hist;  // per axis
  double k_tv = 0.0;                                // max over axes
  std::vector<CgfProbe> probes;
  std::vector<std::string> warnings;
};

struct EnsembleOptions {
  int threads = 0;
  int k_bins = 32;
  double g_low = 0.0;  // when known, warns if t_final < 50 / g_low
};

inline EnsembleStats run_ensemble(const JumpProcess& proc, std::size_t n_traj, double t_final,
                                  const std::vector<Eigen::VectorXd>& probes, std::uint64_t seed,
                                  EnsembleOptions opt = {}) {
  if (n_traj < 2) throw ConfigError("simulate: need at least two trajectories");
  const int d = proc.dim();
  std::vector<ParticleState> fin(n_traj);
  parallel_for(n_traj, resolve_threads(opt.threads),
               [&](std::size_t i) { fin[i] = run_trajectory(proc, seed, i, t_final); });

  EnsembleStats st;
  st.n_traj = n_traj;
  st.t_final = t_final;
  st.seed = seed;
  st.k_bins = opt.k_bins;
  const double n = double(n_traj);
  st.total_jumps = pairwise_sum<std::uint64_t>(0, n_traj, [&](std::size_t i) { return fin[i].jumps; });
  st.mean_x = pairwise_sum<Eigen::VectorXd>(0, n_traj, [&](std::size_t i) { return fin[i].x; }) / n;
  st.cov_x = pairwise_sum<Eigen::MatrixXd>(0, n_traj, [&](std::size_t i) {
               const Eigen::VectorXd c = fin[i].x - st.mean_x;
               return Eigen::MatrixXd(c * c.transpose());
             }) / (n - 1.0);
  st.mean_x_se = (st.cov_x.diagonal() / n).cwiseSqrt();
  st.D = st.cov_x / t_final;
  // standard error of each covariance entry from the spread of the centred products
  const Eigen::MatrixXd m2 = pairwise_sum<Eigen::MatrixXd>(0, n_traj, [&](std::size_t i) {
    const Eigen::VectorXd c = fin[i].x - st.mean_x;
    const Eigen::MatrixXd prod = c * c.transpose() - st.cov_x;
    return Eigen::MatrixXd(prod.cwiseProduct(prod));
  }) / (n - 1.0);
  st.D_se = (m2 / n).cwiseSqrt() / t_final;

  const int levels = proc.config().spin.size();
  st.level_hist.assign(std::size_t(levels), 0);
  for (const auto& f : fin) ++st.level_hist[std::size_t(f.level)];
  st.gibbs = proc.gibbs();
  int dof = -1;
  for (int e = 0; e < levels; ++e) {
    const double expct = n * st.gibbs[std::size_t(e)];
    if (expct <= 0.0) continue;
    const double diff = double(st.level_hist[std::size_t(e)]) - expct;
    st.chi_square += diff * diff / expct;
    ++dof;
  }
  st.chi_square_p = chi_square_pvalue(st.chi_square, dof);

  st.k_hist.assign(std::size_t(d), std::vector<std::uint64_t>(std::size_t(opt.k_bins), 0));
  for (const auto& f : fin)
    for (int a = 0; a < d; ++a) {
      int b = int(std::floor((f.k(a) + std::numbers::pi) / (2.0 * std::numbers::pi) * opt.k_bins));
      b = std::clamp(b, 0, opt.k_bins - 1);
      ++st.k_hist[std::size_t(a)][std::size_t(b)];
    }
  for (int a = 0; a < d; ++a) {
    double tv = 0.0;
    for (auto c : st.k_hist[std::size_t(a)]) tv += std::abs(double(c) / n - 1.0 / opt.k_bins);
    st.k_tv = std::max(st.k_tv, 0.5 * tv);
  }

  for (const auto& p : probes) {
    CgfProbe pr;
    pr.p = p;
    pr.mean = pairwise_sum<cplx>(0, n_traj, [&](std::size_t i) { return std::polar(1.0, -p.dot(fin[i].x)); }) / n;
    const double var = pairwise_sum<double>(0, n_traj, [&](std::size_t i) {
                         return std::norm(std::polar(1.0, -p.dot(fin[i].x)) - pr.mean);
                       }) / (n - 1.0);
    pr.mean_se = std::sqrt(var / n);
    pr.cgf = std::log(pr.mean) / t_final;
    pr.cgf_se = pr.mean_se / (std::abs(pr.mean) * t_final);
    if (std::abs(pr.mean) < 5.0 * pr.mean_se)
      st.warnings.push_back("cgf probe: |E e^{-ipx}| is within noise, the log is unreliable (variance blow-up)");
    st.probes.push_back(pr);
  }
  if (opt.g_low > 0.0 && t_final < 50.0 / opt.g_low)
    st.warnings.push_back("t_final is below 50 / g_low; the ensemble may not have relaxed");
  return st;
}

struct CgfEstimate {
  cplx value;
  double se = 0.0;
  std::vector<std::string> warnings;
};

inline CgfEstimate cgf_estimate(const JumpProcess& proc, const Eigen::VectorXd& p, std::size_t n_traj, double t_final,
                                std::uint64_t seed, int threads = 0) {
  if (p.norm() == 0.0) return {cplx(0.0, 0.0), 0.0, {}};
  EnsembleOptions opt;
  opt.threads = threads;
  const auto st = run_ensemble(proc, n_traj, t_final, {p}, seed, opt);
  return {st.probes[0].cgf, st.probes[0].cgf_se, st.warnings};
}

// Waiting times out of `level`, for the exponential-law test.
inline std::vector<double> sample_waiting_times(const JumpProcess& proc, int level, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0xa11ce);
  std::vector<double> w;
  w.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ParticleState st;
    st.x = Eigen::VectorXd::Zero(proc.dim());
    st.k = Eigen::VectorXd::Zero(proc.dim());
    st.level = level;
    w.push_back(proc.step(st, rng, std::numeric_limits<double>::infinity()));
  }
  return w;
}

inline double ks_statistic_exponential(std::vector<double> xs, double rate) {
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = -std::expm1(-rate * xs[i]);
    dmax = std::max({dmax, std::abs(double(i + 1) / n - cdf), std::abs(cdf - double(i) / n)});
  }
  return dmax;
}

// Recorded path of one trajectory: state after each jump.
inline std::vector<ParticleState> record_path(const JumpProcess& proc, std::uint64_t seed, std::uint64_t index,
                                              double t_final, std::size_t max_points = 100000) {
  Rng rng(seed, index);
  ParticleState st = proc.initial(rng);
  std::vector<ParticleState> path{st};
  while (st.t < t_final && path.size() < max_points) {
    proc.step(st, rng, t_final);
    path.push_back(st);
  }
  return path;
}

}  // namespace latticediff::kmc
