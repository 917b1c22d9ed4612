#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "invop/inverse.hpp"
#include "invop/learner.hpp"
#include "invop/lti.hpp"
#include "invop/signals.hpp"

namespace invop {

/// Eq.-21/22/23-style normalized prediction errors, in percent.
struct MetricReport {
  std::map<int, std::vector<double>> per_traj;  // N -> per-trajectory errors
  std::map<int, double> e_uN;                   // mean over trajectories
  std::map<int, double> e_bar_uN;               // max over trajectories
  int best_N = 0;
  double e_u = 0.0;
  double e_bar_u = 0.0;
};

/// max_m |uhat - u_d| / max_m |u_d| * 100%.
double normalized_max_error(const Eigen::VectorXd& uhat, const Eigen::VectorXd& u_d);
double normalized_max_error(const Trajectory& uhat, const Trajectory& u_d);

MetricReport metric_report(const std::map<int, std::vector<double>>& per_traj);

/// The ten filtered desired trajectories, their analytic derivative
/// channels, and the ideal inverse inputs for a given plant.
struct EvalSuite {
  NormalForm nf;
  double base_dt = 0.01;
  std::vector<FilteredTrajectory> filtered;  // k = 1..10
  std::vector<Trajectory> u_ideal;
};

EvalSuite build_eval_suite(const StateSpace& sys, double base_dt = 0.01);

/// Ideal inverse inputs u_{d,k}: exact inverse with the hidden state from
/// the full-history operator, sampled on the trajectory grid.
std::vector<Trajectory> ideal_inverse_suite(const NormalForm& nf,
                                            const std::vector<FilteredTrajectory>& trajectories,
                                            int derivative_order_r);

/// Evaluation featureization: taps before t=0 read zero (the trajectories
/// start from rest).
DerivativeStack eval_stack(const FilteredTrajectory& filtered, const Trajectory& u_ideal);

/// Per-trajectory normalized errors of a trained model over the suite.
std::vector<double> evaluate_on_suite(const MlpModel& model, const EvalSuite& suite);

/// Normalized max tracking error per trajectory when the plant is driven
/// by the ideal inverse inputs.
std::vector<double> closed_loop_errors(const StateSpace& sys, const EvalSuite& suite);

/// Excitation record with derivative channels: orders 0..r exact from the
/// state (order r includes the direct input term), higher orders from the
/// five-point stencil pair. Optionally adds per-channel AWGN to the output
/// channels; targets stay clean.
DerivativeStack collect_training_record(const StateSpace& sys, const ExcitationSpec& excitation,
                                        double base_dt, bool noisy, double snr, bool snr_is_db,
                                        std::uint64_t noise_seed);

struct SweepConfig {
  StateSpace sys;
  ExcitationSpec excitation = ExcitationSpec::paper_default();
  double base_dt = 0.01;
  std::vector<double> T_list = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  std::vector<double> dt_taps = {0.05};
  std::vector<int> N_pool = {5, 10, 20, 40, 80};
  int seeds = 3;
  std::uint64_t master_seed = 1;
  bool noisy = false;
  double snr = 20.0;
  bool snr_is_db = true;
  TrainConfig budget;
  int jobs = 1;
};

struct DecayFit {
  double beta = 0.0;
  double alpha = 0.0;
  double residual = 0.0;  // rms log-space residual
  int points_used = 0;
  double beta_unweighted = 0.0;
  double alpha_unweighted = 0.0;
};

/// Log-space least squares of e(T) = beta exp(-alpha T). Cells below
/// floor_pct are excluded; the headline fit weights points by e (the
/// decaying regime), the unweighted fit is reported alongside.
DecayFit fit_exponential_decay(const std::vector<double>& T, const std::vector<double>& e,
                               double floor_pct = 0.005);

struct SweepCell {
  double T = 0.0;
  double dt_tap = 0.0;
  int N = 0;
  double e_uN = 0.0;
  double e_bar_uN = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;            // medians across seeds
  std::vector<double> T_list;
  std::vector<double> e_u;                 // median across seeds, primary dt_tap
  DecayFit fit;
  std::string table_csv;
  std::string fit_csv;
};

/// History-length sweep (l = 2 features), Table-2 shaped.
SweepResult sweep_history(const SweepConfig& cfg);

struct AblationRow {
  std::string op_name;  // Gd0..Gd4, NARX, NARXstar
  std::string regime;   // noise-free | noisy
  double e_u = 0.0;
  double e_bar_u = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string table_csv;
};

/// Derivative-ablation sweep at T = first of T_list, Table-3 shaped.
/// Runs the requested regimes ("noise-free", "noisy", or "both").
AblationResult sweep_derivatives(const SweepConfig& cfg, const std::string& regimes = "both");

struct HiddenDecayResult {
  std::vector<double> T_list;
  std::vector<double> measured;  // max ||eta - etahat|| over the record
  std::vector<double> envelope;  // beta1 exp(-alpha1 T)
  DecayBound bound;
  double fitted_rate = 0.0;  // unweighted log-linear decay rate
  std::string csv;
};

/// Window-length decay of the hidden-state estimate over the excitation
/// record, with the analytic bound.
HiddenDecayResult hidden_decay_experiment(const StateSpace& sys, const ExcitationSpec& excitation,
                                          const std::vector<double>& T_list, double base_dt = 0.01,
                                          Eigen::Index eval_stride = 2);

/// Runs fn(0..count-1) on up to `jobs` threads; results must be written to
/// disjoint slots.
void parallel_for(int jobs, Eigen::Index count, const std::function<void(Eigen::Index)>& fn);

double median(std::vector<double> values);

}  // namespace invop
