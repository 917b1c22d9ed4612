#pragma once

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "invop/lti.hpp"

namespace test_support {

// Expands prod (s - root_i) over a self-conjugate root set into real
// ascending coefficients.
inline Eigen::VectorXd poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> coeffs = {1.0};
  for (const auto& root : roots) {
    std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
    for (size_t i = 0; i < coeffs.size(); ++i) {
      next[i + 1] += coeffs[i];
      next[i] -= coeffs[i] * root;
    }
    coeffs = next;
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(coeffs.size()));
  for (size_t i = 0; i < coeffs.size(); ++i) out(static_cast<Eigen::Index>(i)) = coeffs[i].real();
  return out;
}

// Self-conjugate stable root set with bounded damping ratio, |Re| in
// [0.4, lim].
inline std::vector<std::complex<double>> random_stable_roots(std::mt19937_64& rng, int count,
                                                             double lim = 3.0) {
  std::uniform_real_distribution<double> re(0.4, lim);
  std::uniform_real_distribution<double> im(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::complex<double>> roots;
  while (static_cast<int>(roots.size()) < count) {
    const double a = re(rng);
    if (count - static_cast<int>(roots.size()) >= 2 && coin(rng) < 0.5) {
      const double b = a * im(rng);  // damping ratio >= 0.7
      roots.emplace_back(-a, b);
      roots.emplace_back(-a, -b);
    } else {
      roots.emplace_back(-a, 0.0);
    }
  }
  return roots;
}

// Random stable minimum-phase system of order n and relative degree r:
// companion realization of a random pole/zero set under a random
// orthogonal change of basis.
inline invop::StateSpace random_min_phase_system(std::mt19937_64& rng, int n, int r) {
  const Eigen::VectorXd den = poly_from_roots(random_stable_roots(rng, n, 1.5));
  const Eigen::VectorXd zeros = poly_from_roots(random_stable_roots(rng, n - r, 1.5));
  std::uniform_real_distribution<double> gain_dist(0.5, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double gain = gain_dist(rng) * (coin(rng) < 0.5 ? -1.0 : 1.0);

  invop::StateSpace sys;
  sys.A = Eigen::MatrixXd::Zero(n, n);
  if (n > 1) sys.A.topRightCorner(n - 1, n - 1).setIdentity();
  sys.A.row(n - 1) = -den.head(n).transpose();
  sys.B = Eigen::VectorXd::Unit(n, n - 1);
  sys.C = Eigen::RowVectorXd::Zero(n);
  sys.C.head(n - r + 1) = gain * zeros.transpose();

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) G(i, j) = gauss(rng);
  }
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  sys.A = (Q.transpose() * sys.A * Q).eval();
  sys.B = (Q.transpose() * sys.B).eval();
  sys.C = (sys.C * Q).eval();
  return sys;
}

inline std::vector<std::complex<double>> sorted_complex(const Eigen::VectorXcd& v) {
  std::vector<std::complex<double>> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

}  // namespace test_support
