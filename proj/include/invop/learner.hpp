#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invop/trajectory.hpp"

namespace invop {

enum class FeatureMode { HistoryDerivatives, Narx, NarxStar };

std::string to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

/// Layout of one regression row: history taps of the output at dt_tap
/// spacing over [t-T, t], the output derivatives through order l at t, and
/// for the NARX modes additionally the past input taps u[t-T .. t-dt_tap].
struct FeatureSpec {
  double T = 3.2;
  double dt_tap = 0.05;
  int l = 2;
  FeatureMode mode = FeatureMode::HistoryDerivatives;

  int history_taps() const;            // m_T + 1
  int width() const;
  bool uses_input_taps() const { return mode != FeatureMode::HistoryDerivatives; }
  /// Throws unless m_T = T/dt_tap and the tap stride dt_tap/base_dt are
  /// integers, l <= 4, and the NARX modes carry l = 0 / l = 2.
  void validate(double base_dt) const;
  std::vector<std::string> feature_names() const;
};

/// Output-derivative channels (orders 0..4) aligned with the input record.
/// `margin34` marks how many boundary samples of the order-3/4 channels are
/// stencil artifacts. When `padded_history` is set, taps before the record
/// start read as zero (the signal is at rest before t0).
struct DerivativeStack {
  Trajectory signals;  // channels y, y1, y2, y3, y4
  Trajectory u;        // channel u, same grid
  Eigen::Index margin34 = 0;
  bool padded_history = false;
};

struct Dataset {
  FeatureSpec spec;
  Eigen::MatrixXd X;
  Eigen::VectorXd y_target;
  std::vector<double> sample_times;

  std::string to_csv() const;
};

/// One row per base-rate sample with complete history and valid derivative
/// channels; target is the input sample. Throws when no row qualifies.
Dataset build_dataset(const DerivativeStack& stack, const FeatureSpec& spec);

struct TrainConfig {
  int max_epochs = 30;
  int patience = 6;
  double learning_rate = 3e-4;
  double ridge = 1e-10;       // relative, applied to standardized features
  double init_scale = 0.05;   // premultiplies the 1/sqrt(fan-in) init
  double val_fraction = 0.15;
  double cycle_length = 10.0;  // contiguous-block validation split period
};

/// One-hidden-layer tanh network with min-max input/output normalization.
struct MlpModel {
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::RowVectorXd W2;
  double b2 = 0.0;
  Eigen::VectorXd in_lo, in_hi;
  double out_lo = 0.0, out_hi = 1.0;
  FeatureSpec spec;
  std::uint64_t seed = 0;

  int hidden() const { return static_cast<int>(W1.rows()); }
  std::string to_json() const;
  void save(const std::string& path) const;
  static MlpModel from_json(const std::string& text);
  static MlpModel load(const std::string& path);
};

/// Deterministic trainer: ridge pre-fit warm start on one hidden row,
/// full-batch Adam with a standardized ridge re-solve of the output layer
/// each epoch, early stopping on a contiguous-block validation split.
MlpModel train_mlp(const Dataset& ds, int hidden, std::uint64_t seed,
                   const TrainConfig& cfg = {});

double predict(const MlpModel& model, const Eigen::VectorXd& features);
Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X);

struct ModelPool {
  std::map<int, MlpModel> models;
  std::map<int, double> errors;  // e_{u,N}
};

/// argmin over the error map, ties broken toward the smaller width.
int select_best(const std::map<int, double>& errors);

}  // namespace invop
