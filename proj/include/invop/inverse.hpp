#pragma once

#include <Eigen/Dense>

#include "invop/lti.hpp"
#include "invop/trajectory.hpp"

namespace invop {

struct HiddenStateEstimate {
  Eigen::VectorXd eta;
  double window_T = 0.0;
  enum class Method { FullHistory, FiniteWindow } method = Method::FiniteWindow;
};

/// Exponential envelope ||e^(A4 t)||_2 <= kappa1 e^(-alpha1 t) together
/// with the induced hidden-state error bound beta1 e^(-alpha1 T).
struct DecayBound {
  double kappa1 = 0.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;
  double M = 0.0;

  double envelope(double T) const { return beta1 * std::exp(-alpha1 * T); }
};

/// Reconstructs eta over a full output record that starts from rest, by
/// integrating eta' = A3 y + A4 eta from zero. Throws "operator unstable"
/// when the zero dynamics are not Hurwitz.
Trajectory hidden_state_full(const NormalForm& nf, const Trajectory& y);

/// Finite-window estimate: integrates the eta dynamics over the window
/// samples from a zero state at the window start. An empty or single-sample
/// window yields the zero estimate with window_T = 0.
HiddenStateEstimate hidden_state_window(const NormalForm& nf, const Eigen::VectorXd& y_window,
                                        double dt);

/// alpha1 = (1 - margin) * |spectral abscissa of A4| with a 2% margin,
/// kappa1 fitted as the max of ||e^(A4 t)||_2 e^(alpha1 t) over t_grid,
/// beta1 = M ||A3|| kappa1 / alpha1.
DecayBound decay_bound(const NormalForm& nf, double M, const Eigen::VectorXd& t_grid);

/// u_d = b_lead^-1 [ y_d^(r) - A_xi xi_d - A_eta eta_d ].
double exact_inverse_input(const NormalForm& nf, const Eigen::VectorXd& xi_d, double yr_d,
                           const Eigen::VectorXd& eta_d);

/// Exact inverse with eta replaced by the finite-window estimate from
/// y_history.
double windowed_inverse_input(const NormalForm& nf, const Eigen::VectorXd& y_history,
                              const Eigen::VectorXd& xi_d, double yr_d, double dt);

}  // namespace invop
