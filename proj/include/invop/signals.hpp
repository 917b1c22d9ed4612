#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "invop/trajectory.hpp"

namespace invop {

/// Chirp-plus-piecewise excitation cycles. The default is the 20-cycle
/// (f_i, alpha_i) schedule used for data collection.
struct ExcitationSpec {
  std::vector<std::pair<double, double>> cycles;  // (f_hz, alpha)
  double cycle_duration = 10.0;

  static ExcitationSpec paper_default();
  /// Text file, one "f alpha" pair per line, '#' comments allowed.
  static ExcitationSpec from_file(const std::string& path);
};

/// alpha * [4 sin(pi (f/10) t^2) + s(t) + r(t)] on t in [0, 10].
double excitation_cycle(double f_hz, double alpha, double t);

/// Concatenates the spec's cycles into one record (channel "u").
Trajectory excitation_signal(const ExcitationSpec& spec, double dt);

/// The ten analytic evaluation shapes, k in 1..10, t in [0, 10].
double nominal_trajectory(int k, double t);

/// Four cascaded first-order low-pass stages a/(s+a) plus the derivative
/// recombination matrix. `derivatives` holds y_d and its first four time
/// derivatives; `stages` holds the cascade states y1..y3 and the input y0.
struct FilteredTrajectory {
  Trajectory derivatives;  // channels y_d, y_d1, y_d2, y_d3, y_d4
  Trajectory stages;       // channels y1, y2, y3, y0
  double cutoff_a = 0.0;

  Eigen::VectorXd channel(int order) const { return derivatives.samples.col(order); }
};

FilteredTrajectory filter_chain(const Trajectory& y0, double a = 6.283185307179586);

/// Additive white Gaussian noise per channel at the requested SNR,
/// deterministic in the seed. snr is in dB when snr_is_db, else a linear
/// power ratio.
Trajectory add_awgn(const Trajectory& y, double snr, std::uint64_t seed, bool snr_is_db = true);

/// Five-point stencils mapping a second-derivative record to estimates of
/// the third and fourth derivatives. The outermost `margin` samples on each
/// side are not covered by the stencil and must be excluded downstream.
struct StencilDerivatives {
  Trajectory y3;
  Trajectory y4;
  Eigen::Index margin = 2;
};

StencilDerivatives finite_difference_34(const Trajectory& yddot);

/// SplitMix64 step; used to derive independent per-job seeds from one
/// master seed.
std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t salt);

}  // namespace invop
