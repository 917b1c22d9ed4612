#pragma once

#include <functional>

#include <Eigen/Dense>

#include "invop/trajectory.hpp"

namespace invop {

/// Continuous-time LTI SISO plant  x' = A x + B u,  y = C x.
struct StateSpace {
  Eigen::MatrixXd A;     // n x n
  Eigen::VectorXd B;     // n x 1
  Eigen::RowVectorXd C;  // 1 x n

  Eigen::Index n() const { return A.rows(); }
  void validate() const;
};

/// num/den in ascending powers of s; den is monic of degree n, num has
/// degree n - r with a nonzero leading coefficient.
struct TransferFunction {
  Eigen::VectorXd num;
  Eigen::VectorXd den;
  int r = 0;

  double b_lead() const { return num(num.size() - 1); }
  /// Evaluates num(s)/den(s) at a real s.
  double gain(double s) const;
};

/// Output-derivative / hidden-state decomposition
///   xi'  = A1 xi + A2 eta + B1 u
///   eta' = A3 y + A4 eta
/// with [xi; eta] = S x, xi_i = y^(i-1).
struct NormalForm {
  Eigen::MatrixXd S;
  Eigen::MatrixXd A1;     // r x r
  Eigen::MatrixXd A2;     // r x (n-r)
  Eigen::VectorXd B1;     // r
  Eigen::VectorXd A3;     // n-r
  Eigen::MatrixXd A4;     // (n-r) x (n-r), companion
  Eigen::RowVectorXd A_xi;   // last row of A1
  Eigen::RowVectorXd A_eta;  // last row of A2
  double b_lead = 0.0;
  int r = 0;

  Eigen::Index n() const { return S.rows(); }
  Eigen::Index eta_dim() const { return n() - r; }
};

/// Smallest i >= 1 with |C A^(i-1) B| above tol * ||C|| ||B|| ||A||^(i-1).
/// Throws "degenerate system" if no i <= n qualifies.
int relative_degree(const StateSpace& sys, double tol = 1e-9);

/// Roots of a polynomial given in ascending coefficients, via the
/// eigenvalues of its companion matrix. Degree 0 gives an empty vector.
Eigen::VectorXcd polynomial_roots(const Eigen::VectorXd& ascending);

/// Transfer function via the Faddeev-LeVerrier recursion.
TransferFunction transfer_function(const StateSpace& sys, double tol = 1e-9);

/// True iff every eigenvalue of M has real part < -tol.
bool is_hurwitz(const Eigen::MatrixXd& M, double tol = 0.0);

/// True iff every numerator root has real part < -tol.
bool is_minimum_phase(const TransferFunction& tf, double tol = 0.0);

/// Builds the normal form. Rows 1..r of S are C, CA, ..., CA^(r-1); the
/// eta rows come from the controller-canonical similarity transform. The
/// transformed dynamics are verified against the block structure within
/// tol before returning.
NormalForm normal_form(const StateSpace& sys, double tol = 1e-9);

/// Fixed-step classical RK4 integration of the plant under a callable
/// input. Output trajectory has channels x1..xn plus y = C x.
Trajectory simulate(const StateSpace& sys, const std::function<double(double)>& u,
                    const Eigen::VectorXd& x0, double dt, double duration);

/// Same, with a sampled input linearly interpolated between grid points.
/// The input's own grid and length define the simulation grid.
Trajectory simulate(const StateSpace& sys, const Trajectory& u, const Eigen::VectorXd& x0);

/// Applies a unit step from rest and locates the lowest output-derivative
/// order that is discontinuous at the step. An order counts as jumping
/// when its magnitude inside the stencil-smear window around the step
/// reaches max(half its post-step peak, jump_ratio * pre-step variation).
int identify_relative_degree_from_step(const StateSpace& sys, double dt = 0.01,
                                       double jump_ratio = 5.0);

/// The two-mass-spring-damper plant used throughout the experiments
/// (m1=10, m2=5, k1=110, c1=68, a=k1/2, k2=75, c2=60, y = x2).
StateSpace build_example_system();

}  // namespace invop
