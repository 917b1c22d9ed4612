#include "invop/inverse.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace invop {

namespace {

// RK4 on eta' = A4 eta + A3 y with y sampled on the integration grid and
// linearly interpolated at half steps. Returns the state after each sample.
Eigen::MatrixXd integrate_eta(const Eigen::MatrixXd& A4, const Eigen::VectorXd& A3,
                              const Eigen::VectorXd& y, double dt) {
  const auto m = y.size();
  const auto d = A4.rows();
  Eigen::MatrixXd out(m, d);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  out.row(0).setZero();
  Eigen::VectorXd k1(d), k2(d), k3(d), k4(d);
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    const double y1 = y(k), y3 = y(k + 1), y2 = 0.5 * (y1 + y3);
    k1 = A4 * x + A3 * y1;
    k2 = A4 * (x + 0.5 * dt * k1) + A3 * y2;
    k3 = A4 * (x + 0.5 * dt * k2) + A3 * y2;
    k4 = A4 * (x + dt * k3) + A3 * y3;
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw std::runtime_error("simulation diverged");
    out.row(k + 1) = x.transpose();
  }
  return out;
}

void require_minimum_phase(const NormalForm& nf) {
  if (nf.eta_dim() > 0 && !is_hurwitz(nf.A4)) {
    throw std::runtime_error("operator unstable: zero dynamics not Hurwitz");
  }
}

}  // namespace

Trajectory hidden_state_full(const NormalForm& nf, const Trajectory& y) {
  y.validate();
  require_minimum_phase(nf);
  const Eigen::VectorXd ysig = y.samples.col(0);
  Trajectory out;
  out.dt = y.dt;
  out.t0 = y.t0;
  for (Eigen::Index i = 0; i < nf.eta_dim(); ++i) {
    out.channels.push_back("eta" + std::to_string(i + 1));
  }
  out.samples = nf.eta_dim() > 0 ? integrate_eta(nf.A4, nf.A3, ysig, y.dt)
                                 : Eigen::MatrixXd(y.rows(), 0);
  return out;
}

HiddenStateEstimate hidden_state_window(const NormalForm& nf, const Eigen::VectorXd& y_window,
                                        double dt) {
  require_minimum_phase(nf);
  HiddenStateEstimate est;
  est.method = HiddenStateEstimate::Method::FiniteWindow;
  est.eta = Eigen::VectorXd::Zero(nf.eta_dim());
  if (y_window.size() < 2 || nf.eta_dim() == 0) {
    est.window_T = 0.0;
    return est;
  }
  est.window_T = static_cast<double>(y_window.size() - 1) * dt;
  est.eta = integrate_eta(nf.A4, nf.A3, y_window, dt).bottomRows(1).transpose();
  return est;
}

DecayBound decay_bound(const NormalForm& nf, double M, const Eigen::VectorXd& t_grid) {
  if (M < 0) throw std::invalid_argument("M must be nonnegative");
  if (nf.eta_dim() == 0) {
    // full relative degree: the estimate is exact for any window
    return DecayBound{1.0, 1.0, 0.0, M};
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(nf.A4, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral failure");
  const double abscissa = es.eigenvalues().real().maxCoeff();
  if (abscissa >= 0.0) throw std::runtime_error("no exponential bound: A4 not Hurwitz");

  DecayBound bound;
  bound.M = M;
  bound.alpha1 = -abscissa * (1.0 - 0.02);
  double kappa = 1.0;  // t = 0 gives ||I|| = 1
  for (Eigen::Index i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid(i);
    if (t < 0) throw std::invalid_argument("t_grid entries must be nonnegative");
    const Eigen::MatrixXd E = (nf.A4 * t).exp();
    const double norm2 = E.jacobiSvd().singularValues()(0);
    kappa = std::max(kappa, norm2 * std::exp(bound.alpha1 * t));
  }
  bound.kappa1 = kappa;
  bound.beta1 = M * nf.A3.norm() * kappa / bound.alpha1;
  return bound;
}

double exact_inverse_input(const NormalForm& nf, const Eigen::VectorXd& xi_d, double yr_d,
                           const Eigen::VectorXd& eta_d) {
  if (xi_d.size() != nf.r || eta_d.size() != nf.eta_dim()) {
    throw std::invalid_argument("state dimension mismatch");
  }
  return (yr_d - nf.A_xi * xi_d - nf.A_eta * eta_d) / nf.b_lead;
}

double windowed_inverse_input(const NormalForm& nf, const Eigen::VectorXd& y_history,
                              const Eigen::VectorXd& xi_d, double yr_d, double dt) {
  const auto est = hidden_state_window(nf, y_history, dt);
  return exact_inverse_input(nf, xi_d, yr_d, est.eta);
}

}  // namespace invop
