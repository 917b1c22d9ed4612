#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace invop {

/// Uniformly sampled multi-channel time series. Rows are samples, columns
/// are channels.
struct Trajectory {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<std::string> channels;
  Eigen::MatrixXd samples;

  Eigen::Index rows() const { return samples.rows(); }
  Eigen::Index cols() const { return samples.cols(); }
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * dt; }
  double duration() const { return static_cast<double>(rows() - 1) * dt; }

  bool has(const std::string& name) const;
  Eigen::Index channel_index(const std::string& name) const;
  Eigen::VectorXd col(const std::string& name) const;

  /// Throws if sampling is invalid, there are no samples, or any value is
  /// non-finite.
  void validate() const;

  /// CSV with header row `t,<channel names...>`, one row per sample,
  /// 17 significant digits, LF line endings.
  std::string to_csv() const;
  void save_csv(const std::string& path) const;

  /// Parses the format written by to_csv. Leading lines starting with '#'
  /// are skipped.
  static Trajectory from_csv_text(const std::string& text);
  static Trajectory load_csv(const std::string& path);
};

/// Single-channel convenience constructor.
Trajectory make_trajectory(double dt, double t0, const std::string& channel,
                           const Eigen::VectorXd& values);

/// Piecewise-linear evaluation of one column of a trajectory, clamped at the
/// record ends.
double interp_channel(const Trajectory& traj, Eigen::Index column, double t);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

}  // namespace invop
