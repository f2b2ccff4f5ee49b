#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace latticediff::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Jacobi rule on [-1,1] for the weight (1-x)^alpha (1+x)^beta, via Golub-Welsch.
inline Rule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw std::invalid_argument("gauss_jacobi: n must be positive");
  if (alpha <= -1.0 || beta <= -1.0) throw std::invalid_argument("gauss_jacobi: exponents must exceed -1");
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double ab = alpha + beta;
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                              std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
  // Chebyshev of the first kind: the generic recurrence is 0/0 at k=1.
  if (std::abs(alpha + 0.5) < 1e-15 && std::abs(beta + 0.5) < 1e-15) {
    for (int j = 0; j < n; ++j) {
      rule.nodes[j] = -std::cos(std::numbers::pi * (2.0 * j + 1.0) / (2.0 * n));
      rule.weights[j] = std::numbers::pi / n;
    }
    return rule;
  }
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 1);
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    if (k == 0)
      diag(k) = (beta - alpha) / (ab + 2.0);
    else
      diag(k) = (beta * beta - alpha * alpha) / (s * (s + 2.0));
    if (k >= 1) {
      const double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
      const double den = s * s * (s + 1.0) * (s - 1.0);
      sub(k - 1) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (n == 1) {
    rule.nodes[0] = diag(0);
    rule.weights[0] = mu0;
    return rule;
  }
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  for (int j = 0; j < n; ++j) {
    rule.nodes[j] = es.eigenvalues()(j);
    const double v0 = es.eigenvectors()(0, j);
    rule.weights[j] = mu0 * v0 * v0;
  }
  return rule;
}

inline Rule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

// Affine map of a rule on [-1,1] onto [a,b], appended to out.
inline void append_mapped(const Rule& ref, double a, double b, Rule& out) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t j = 0; j < ref.nodes.size(); ++j) {
    out.nodes.push_back(mid + half * ref.nodes[j]);
    out.weights.push_back(half * ref.weights[j]);
  }
}

// |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2). |S^0| = 2.
inline double sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

// Directions on S^{d-1} with weights summing to |S^{d-1}|. The set is closed under s -> -s.
struct SphereRule {
  int dim = 1;
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;
};

inline SphereRule sphere_rule(int d, int m) {
  SphereRule rule;
  rule.dim = d;
  if (d == 1) {
    rule.nodes = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
    rule.weights = {1.0, 1.0};
    return rule;
  }
  if (m < 2 || m % 2 != 0) throw std::invalid_argument("sphere_rule: node count must be even and >= 2");
  const double w = sphere_area(d) / m;
  if (d == 2) {
    for (int j = 0; j < m; ++j) {
      const double th = 2.0 * std::numbers::pi * (j + 0.5) / m;
      Eigen::VectorXd s(2);
      s << std::cos(th), std::sin(th);
      rule.nodes.push_back(s);
      rule.weights.push_back(w);
    }
    return rule;
  }
  // d >= 3: fixed-seed Gaussian directions, paired antipodally.
  std::mt19937_64 gen(0x5eed5eedULL + static_cast<unsigned>(d));
  std::normal_distribution<double> normal;
  for (int j = 0; j < m / 2; ++j) {
    Eigen::VectorXd s(d);
    for (int i = 0; i < d; ++i) s(i) = normal(gen);
    s.normalize();
    rule.nodes.push_back(s);
    rule.nodes.push_back(-s);
    rule.weights.push_back(w);
    rule.weights.push_back(w);
  }
  return rule;
}

// S_d(z) = int_{S^{d-1}} ds e^{i z s_1}. Real and even in z.
// Gauss-Jacobi in eta = s_1 while |z| <= order; closed Bessel form beyond.
class SphereFourier {
 public:
  explicit SphereFourier(int d, int order = 64) : d_(d), order_(order) {
    if (d >= 2) {
      const double ex = 0.5 * (d - 3);
      eta_ = gauss_jacobi(order, ex, ex);
      const double vol = d == 2 ? 2.0 : sphere_area(d - 1);
      for (double& w : eta_.weights) w *= vol;
    }
    area_ = sphere_area(d);
  }

  int dim() const { return d_; }
  int order() const { return order_; }

  double operator()(double z) const {
    z = std::abs(z);
    if (d_ == 1) return 2.0 * std::cos(z);
    if (z == 0.0) return area_;
    if (z <= order_) return by_jacobi(z);
    return by_bessel(d_, z);
  }

  double by_jacobi(double z) const {
    double s = 0.0;
    for (std::size_t j = 0; j < eta_.nodes.size(); ++j) s += eta_.weights[j] * std::cos(z * eta_.nodes[j]);
    return s;
  }

  // (2 pi)^{d/2} z^{1-d/2} J_{d/2-1}(z)
  static double by_bessel(int d, double z) {
    z = std::abs(z);
    if (d == 1) return 2.0 * std::cos(z);
    if (z == 0.0) return sphere_area(d);
    const double nu = 0.5 * d - 1.0;
    return std::pow(2.0 * std::numbers::pi, 0.5 * d) * std::pow(z, -nu) * boost::math::cyl_bessel_j(nu, z);
  }

 private:
  int d_;
  int order_;
  double area_ = 0.0;
  Rule eta_;
};

}  // namespace latticediff::quad
