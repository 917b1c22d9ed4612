#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "invop/harness.hpp"

namespace invop {

/// Unreadable or inconsistent configuration / input: exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model/request incompatibility: exit code 3.
struct compat_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCompat = 3;
constexpr int kExitNumeric = 4;

struct RunConfig {
  std::string system = "example";  // "example" or a state-space JSON file
  double base_rate_hz = 100.0;
  std::vector<double> T_list = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  std::vector<double> dt_taps = {0.05};
  std::vector<int> N_pool = {5, 10, 20, 40, 80};
  int l = 2;
  std::string mode = "history-derivatives";
  std::string regime = "noise-free";  // noise-free | noisy | both
  double snr = 20.0;
  bool snr_is_db = true;
  std::uint64_t seed = 1;
  int seeds = 3;
  int jobs = 1;
  std::string out_dir = ".";
  std::string excitation_file;  // optional (f, alpha) cycle list
  TrainConfig budget;

  double base_dt() const { return 1.0 / base_rate_hz; }
  StateSpace load_system() const;
  ExcitationSpec load_excitation() const;

  static RunConfig from_json_file(const std::string& path);
  /// INVOP_SEED and INVOP_OUT override the config.
  void apply_env_overrides();
};

/// Writes a state-space JSON file ({"A": [[..]], "B": [..], "C": [..]}).
void save_state_space(const StateSpace& sys, const std::string& path);
StateSpace load_state_space(const std::string& path);

/// `simulate` subcommand: drives the plant with the named input source
/// ("excitation", "step", "zero", "traj:<k>", or a trajectory CSV path) and
/// writes a CSV with u, y and the derivative channels.
int cmd_simulate(const RunConfig& cfg, const std::string& input);

/// `collect` subcommand: training record + feature assembly, written as a
/// dataset CSV.
int cmd_collect(const RunConfig& cfg);

/// `train` subcommand: trains the N pool on the configured dataset, writes
/// model_N*.json and pool_report.csv.
int cmd_train(const RunConfig& cfg);

/// `invert` subcommand: model file or "analytic"; trajectory index k or a
/// filtered-trajectory CSV. Writes the predicted input and an error report.
int cmd_invert(const RunConfig& cfg, const std::string& model, const std::string& traj,
               std::optional<double> expect_T = std::nullopt,
               std::optional<double> expect_dt = std::nullopt,
               std::optional<int> expect_l = std::nullopt);

/// `reproduce` subcommand: which is "table2", "table3" or "decay-fit".
int cmd_reproduce(const RunConfig& cfg, const std::string& which);

/// `decay` subcommand: hidden-state window-length decay experiment.
int cmd_decay(const RunConfig& cfg);

}  // namespace invop
