#pragma once

#include "error.hpp"
#include "generator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

namespace latticediff::spectral {

using cplx = std::complex<double>;

// Kernel vector of a (singular) generator by shifted inverse iteration.
inline Eigen::VectorXd null_vector(const Eigen::MatrixXd& m, Eigen::VectorXd start, int cap = 60, double tol = 1e-15) {
  const double scale = m.cwiseAbs().maxCoeff();
  const double shift = 1e-9 * std::max(scale, 1.0);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m - shift * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  Eigen::VectorXd v = start.normalized();
  for (int it = 0; it < cap; ++it) {
    Eigen::VectorXd w = lu.solve(v);
    w.normalize();
    if (w.dot(v) < 0) w = -w;
    const double change = (w - v).cwiseAbs().maxCoeff();
    v = w;
    if (change < tol) return v;
  }
  if ((m * v).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    throw NumericError("non-convergence", "stationary state: inverse iteration hit its cap");
  return v;
}

// Stationary density, started from the Gibbs ansatz, normalized like gibbs_uniform().
inline Eigen::VectorXd stationary_state(const generator::GeneratorMatrices& gen) {
  const Eigen::VectorXd g = gen.gibbs_uniform();
  Eigen::VectorXd v = null_vector(gen.m00(), g);
  v *= g.sum() / v.sum();
  return v;
}

// Left kernel, normalized to have mean one.
inline Eigen::VectorXd left_null_vector(const generator::GeneratorMatrices& gen) {
  const Eigen::MatrixXd mt = gen.m00().transpose();
  Eigen::VectorXd v = null_vector(mt, Eigen::VectorXd::Ones(mt.rows()));
  v /= v.mean();
  return v;
}

struct PerronResult {
  cplx value;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;  // normalized so that left^H right = 1
  int iterations = 0;
};

// Inverse iteration on both sides at a fixed shift; the eigenvalue is the two-sided Rayleigh quotient.
inline PerronResult inverse_iteration(const Eigen::MatrixXcd& m, cplx shift, Eigen::VectorXcd r, Eigen::VectorXcd l,
                                      int cap = 400) {
  const Eigen::Index n = m.rows();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m - shift * Eigen::MatrixXcd::Identity(n, n));
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lua(m.adjoint() - std::conj(shift) * Eigen::MatrixXcd::Identity(n, n));
  r.normalize();
  l.normalize();
  PerronResult res;
  for (int it = 1; it <= cap; ++it) {
    r = lu.solve(r);
    r.normalize();
    l = lua.solve(l);
    l.normalize();
    const cplx lr = l.dot(r);
    const cplx lam = l.dot(m * r) / lr;
    const double resid = (m * r - lam * r).norm();
    const double lresid = (m.adjoint() * l - std::conj(lam) * l).norm();
    res.iterations = it;
    if (resid < 1e-12 * scale && lresid < 1e-12 * scale) {
      res.value = lam;
      res.right = r;
      res.left = l / std::conj(lr);
      return res;
    }
  }
  throw NumericError("tracking-loss", "perron: inverse iteration did not converge; the eigenvalue is too close to the bulk");
}

struct ZeroFiber {
  double value = 0.0;  // top eigenvalue of the symmetrized block
  double second = 0.0;
  Eigen::VectorXd phi_hat;  // unit top eigenvector of M00_hat
  Eigen::VectorXd right;
  Eigen::VectorXd left;
};

// p = 0 through the symmetric eigenproblem of M00_hat.
inline ZeroFiber perron_at_zero(const generator::GeneratorMatrices& gen) {
  const Eigen::VectorXd s = gen.similarity();
  Eigen::MatrixXd mh = generator::symmetrize(gen.m00(), s);
  mh = (0.5 * (mh + mh.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mh);
  const Eigen::Index n = mh.rows();
  ZeroFiber z;
  z.value = es.eigenvalues()(n - 1);
  z.second = n > 1 ? es.eigenvalues()(n - 2) : -std::numeric_limits<double>::infinity();
  z.phi_hat = es.eigenvectors().col(n - 1);
  if (z.phi_hat.sum() < 0) z.phi_hat = -z.phi_hat;
  z.right = s.cwiseInverse().asDiagonal() * z.phi_hat;
  z.left = s.asDiagonal() * z.phi_hat;
  z.left /= z.left.dot(z.right);
  return z;
}

// Perron eigenvalue f_rw(p), continued along the segment from 0 to p.
// Step size keeps |dp| * max|grad eps| below a quarter of the p = 0 gap.
class PerronTracker {
 public:
  explicit PerronTracker(const generator::GeneratorMatrices& gen) : gen_(gen), zero_(perron_at_zero(gen)) {
    gap0_ = zero_.value - zero_.second;
    double vmax = 0.0;
    const auto& grid = gen.grid();
    for (std::size_t i = 0; i < grid.size(); ++i)
      vmax = std::max(vmax, dispersion_grad(gen.config().dispersion, grid.k(i)).norm());
    vmax_ = vmax;
  }

  const ZeroFiber& zero() const { return zero_; }
  double gap0() const { return gap0_; }

  PerronResult at(const Eigen::VectorXcd& p) const {
    const double pn = p.norm();
    PerronResult cur;
    cur.value = zero_.value;
    cur.right = zero_.right.cast<cplx>();
    cur.left = zero_.left.cast<cplx>();
    if (pn == 0.0) return cur;
    const double dp_max = vmax_ > 0.0 ? 0.25 * gap0_ / vmax_ : pn;
    const int steps = std::max(1, int(std::ceil(pn / dp_max)));
    for (int s = 1; s <= steps; ++s) {
      const Eigen::VectorXcd ps = p * (double(s) / steps);
      const Eigen::MatrixXcd m = gen_.fiber(ps);
      const double offset = 1e-6 * std::max(1e-3, gap0_);
      cur = inverse_iteration(m, cur.value + offset, cur.right, cur.left);
    }
    return cur;
  }

  PerronResult at(const Eigen::VectorXd& p) const { return at(Eigen::VectorXcd(p.cast<cplx>())); }

 private:
  const generator::GeneratorMatrices& gen_;
  ZeroFiber zero_;
  double gap0_ = 0.0;
  double vmax_ = 0.0;
};

// ---------------------------------------------------------------------- gaps

struct GapSample {
  Eigen::VectorXd p;
  cplx f;
  double gap = 0.0;         // Re f - max Re of the rest
  double max_re_rest = 0.0;
};

struct GapReport {
  std::vector<GapSample> samples;
  double p_star = 0.0;
  double g_low = 0.0;
  double g_high = 0.0;
  struct Block {
    int from, to;
    double max_re = 0.0;
    double closed_form = 0.0;
  };
  std::vector<Block> blocks;
};

inline GapSample full_spectrum_sample(const generator::GeneratorMatrices& gen, const Eigen::VectorXd& p) {
  GapSample g;
  g.p = p;
  Eigen::VectorXcd ev;
  if (p.norm() == 0.0) {
    const ZeroFiber z = perron_at_zero(gen);
    g.f = z.value;
    g.max_re_rest = z.second;
  } else {
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(gen.fiber(p), false);
    ev = es.eigenvalues();
    Eigen::Index top = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
      if (ev(i).real() > ev(top).real()) top = i;
    g.f = ev(top);
    g.max_re_rest = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (i != top) g.max_re_rest = std::max(g.max_re_rest, ev(i).real());
  }
  g.gap = g.f.real() - g.max_re_rest;
  return g;
}

// ps: sampled fibers, must contain p = 0 first or it is added.
inline GapReport spectral_gaps(const generator::GeneratorMatrices& gen, std::vector<Eigen::VectorXd> ps) {
  const int d = gen.grid().dim();
  std::sort(ps.begin(), ps.end(), [](const auto& a, const auto& b) { return a.norm() < b.norm(); });
  if (ps.empty() || ps.front().norm() != 0.0) ps.insert(ps.begin(), Eigen::VectorXd::Zero(d));
  GapReport rep;
  for (const auto& p : ps) rep.samples.push_back(full_spectrum_sample(gen, p));
  const double g0 = rep.samples.front().gap;
  rep.p_star = 0.0;
  for (const auto& s : rep.samples) {
    if (s.gap > 0.5 * g0)
      rep.p_star = s.p.norm();
    else
      break;
  }
  rep.g_low = std::numeric_limits<double>::infinity();
  double high = -std::numeric_limits<double>::infinity();
  for (const auto& s : rep.samples) {
    if (s.p.norm() <= rep.p_star) rep.g_low = std::min(rep.g_low, s.gap);
    if (s.p.norm() >= 0.5 * rep.p_star && s.p.norm() > 0.0) high = std::max(high, s.f.real());
  }
  rep.g_high = std::isfinite(high) ? -high : 0.0;
  const auto& j = gen.escape();
  const Eigen::VectorXcd p0 = Eigen::VectorXcd::Zero(d);
  for (int e = 0; e < gen.levels(); ++e)
    for (int f = 0; f < gen.levels(); ++f) {
      if (e == f) continue;
      const Eigen::VectorXcd diag = gen.fiber_offdiagonal(p0, e, f);
      GapReport::Block b{e, f, diag.real().maxCoeff(), -0.5 * (j[std::size_t(e)] + j[std::size_t(f)])};
      rep.blocks.push_back(b);
    }
  return rep;
}

// ------------------------------------------------------------ diffusion tensor

// D = -Hessian of f_rw at p = 0 (positive, equal to the long-time covariance rate of x).
struct HessianResult {
  Eigen::MatrixXd D;
  Eigen::MatrixXd D_h;   // step h
  Eigen::MatrixXd D_h2;  // step h/2
  Eigen::VectorXd gradient;
  double max_imag = 0.0;
  double richardson_gap = 0.0;  // |D_h - D_h2| relative
  double f0 = 0.0;
};

inline HessianResult diffusion_tensor_hessian(const generator::GeneratorMatrices& gen, double h = 1e-3,
                                              bool strict = true) {
  const int d = gen.grid().dim();
  const PerronTracker tr(gen);
  HessianResult res;
  res.f0 = tr.zero().value;
  auto f = [&](const Eigen::VectorXd& p) { return tr.at(p).value; };
  auto hessian = [&](double step, Eigen::VectorXd* grad) {
    Eigen::MatrixXd H(d, d);
    const double f0 = res.f0;
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd ei = Eigen::VectorXd::Zero(d);
      ei(i) = step;
      const cplx fp = f(ei), fm = f(-ei);
      res.max_imag = std::max({res.max_imag, std::abs(fp.imag()), std::abs(fm.imag())});
      H(i, i) = (fp.real() - 2.0 * f0 + fm.real()) / (step * step);
      if (grad) (*grad)(i) = (fp.real() - fm.real()) / (2.0 * step);
      for (int j = 0; j < i; ++j) {
        Eigen::VectorXd ej = Eigen::VectorXd::Zero(d);
        ej(j) = step;
        const cplx fpp = f(ei + ej), fpm = f(ei - ej), fmp = f(-ei + ej), fmm = f(-ei - ej);
        res.max_imag = std::max({res.max_imag, std::abs(fpp.imag()), std::abs(fpm.imag()), std::abs(fmp.imag()),
                                 std::abs(fmm.imag())});
        H(i, j) = H(j, i) = (fpp.real() - fpm.real() - fmp.real() + fmm.real()) / (4.0 * step * step);
      }
    }
    return H;
  };
  res.gradient = Eigen::VectorXd::Zero(d);
  res.D_h = -hessian(h, &res.gradient);
  res.D_h2 = -hessian(0.5 * h, nullptr);
  res.D = (4.0 * res.D_h2 - res.D_h) / 3.0;
  // below this the differences only resolve rounding in f (about 64 eps times the rate scale)
  const double rate_scale = std::max(1.0, gen.m00().diagonal().cwiseAbs().maxCoeff());
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * rate_scale / (0.25 * h * h);
  const double norm = std::max(res.D.cwiseAbs().maxCoeff(), 1e4 * noise);
  res.richardson_gap = (res.D_h - res.D_h2).cwiseAbs().maxCoeff() / norm;
  if (strict && res.richardson_gap > 1e-4)
    throw NumericError("fd-inconsistency", "diffusion hessian: steps h and h/2 disagree by " +
                                               std::to_string(res.richardson_gap) + " relative");
  return res;
}

struct FormulaResult {
  Eigen::MatrixXd D;
  std::vector<double> solvability;  // |<phi, V_i phi>| / (|phi| |V_i phi|)
  std::vector<int> iterations;
};

// Conjugate gradients for (-M_hat) u = b on the complement of phi (unit vector).
inline Eigen::VectorXd projected_cg(const Eigen::MatrixXd& neg_m, const Eigen::VectorXd& phi, Eigen::VectorXd b,
                                    double tol, int cap, int& iters) {
  auto project = [&](Eigen::VectorXd v) { return Eigen::VectorXd(v - phi.dot(v) * phi); };
  b = project(b);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b, p = r;
  double rr = r.squaredNorm();
  const double bnorm = std::sqrt(rr);
  iters = 0;
  if (bnorm == 0.0) return x;
  while (std::sqrt(rr) > tol * bnorm) {
    if (++iters > cap) throw NumericError("non-convergence", "diffusion formula: conjugate gradients hit the iteration cap");
    const Eigen::VectorXd ap = project(neg_m * p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return project(x);
}

// D_ij = 2 <d_i eps phi_hat, (-M00_hat)^{-1} d_j eps phi_hat> / <phi_hat, phi_hat>
inline FormulaResult diffusion_tensor_formula(const generator::GeneratorMatrices& gen, double tol = 1e-10) {
  const int d = gen.grid().dim();
  const auto& grid = gen.grid();
  const ZeroFiber z = perron_at_zero(gen);
  const Eigen::VectorXd s = gen.similarity();
  Eigen::MatrixXd neg = -generator::symmetrize(gen.m00(), s);
  neg = (0.5 * (neg + neg.transpose())).eval();
  const Eigen::VectorXd& phi = z.phi_hat;
  std::vector<Eigen::VectorXd> b(std::size_t(d), Eigen::VectorXd(gen.dim()));
  for (int e = 0; e < gen.levels(); ++e)
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Eigen::VectorXd g = dispersion_grad(gen.config().dispersion, grid.k(k));
      for (int i = 0; i < d; ++i) b[std::size_t(i)](gen.index(e, k)) = g(i) * phi(gen.index(e, k));
    }
  FormulaResult res;
  res.D = Eigen::MatrixXd::Zero(d, d);
  std::vector<Eigen::VectorXd> u(static_cast<std::size_t>(d));
  const int cap = int(10 * gen.dim());
  for (int i = 0; i < d; ++i) {
    const double bn = b[std::size_t(i)].norm();
    res.solvability.push_back(bn > 0 ? std::abs(phi.dot(b[std::size_t(i)])) / bn : 0.0);
    int it = 0;
    u[std::size_t(i)] = projected_cg(neg, phi, b[std::size_t(i)], tol, cap, it);
    res.iterations.push_back(it);
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) res.D(i, j) = 2.0 * b[std::size_t(i)].dot(u[std::size_t(j)]) / phi.squaredNorm();
  res.D = (0.5 * (res.D + res.D.transpose())).eval();
  return res;
}

}  // namespace latticediff::spectral
