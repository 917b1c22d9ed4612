#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "invop/app.hpp"

namespace {

void add_common(CLI::App* cmd, std::string* config_path, invop::RunConfig* cfg) {
  cmd->add_option("--config", *config_path, "JSON config file");
  cmd->add_option("--seed", cfg->seed, "master seed");
  cmd->add_option("--jobs", cfg->jobs, "parallel sweep jobs");
  cmd->add_option("--out", cfg->out_dir, "output directory");
  cmd->add_option("--system", cfg->system, "'example' or a state-space JSON file");
  cmd->add_option("--base-rate", cfg->base_rate_hz, "base sampling rate in Hz");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invop: data-enabled inverse operators for stable minimum-phase LTI systems"};
  app.require_subcommand(1);

  invop::RunConfig cfg;
  std::string config_path;

  // flags that override the config file when explicitly provided
  std::vector<double> T_list, dt_taps;
  std::vector<int> N_pool;
  std::optional<double> flag_T, flag_dt;
  std::optional<int> flag_l;

  auto* sim = app.add_subcommand("simulate", "simulate the plant under an input source");
  std::string sim_input = "excitation";
  sim->add_option("--input", sim_input, "excitation | step | zero | traj:<k> | <csv path>");
  add_common(sim, &config_path, &cfg);

  auto* collect = app.add_subcommand("collect", "assemble a training dataset CSV");
  add_common(collect, &config_path, &cfg);
  collect->add_option("--T", flag_T, "history window (s)");
  collect->add_option("--dt-tap", flag_dt, "tap spacing (s)");
  collect->add_option("--l", flag_l, "derivative order");
  collect->add_option("--mode", cfg.mode, "history-derivatives | narx | narx-star");
  collect->add_option("--regime", cfg.regime, "noise-free | noisy");

  auto* train = app.add_subcommand("train", "train the hidden-width pool and report errors");
  add_common(train, &config_path, &cfg);
  train->add_option("--T", flag_T, "history window (s)");
  train->add_option("--dt-tap", flag_dt, "tap spacing (s)");
  train->add_option("--l", flag_l, "derivative order");
  train->add_option("--mode", cfg.mode, "history-derivatives | narx | narx-star");
  train->add_option("--regime", cfg.regime, "noise-free | noisy");
  train->add_option("--N", N_pool, "hidden widths");

  auto* invert = app.add_subcommand("invert", "predict the inverse input for a trajectory");
  std::string model_arg = "analytic";
  std::string traj_arg = "6";
  invert->add_option("--model", model_arg, "model JSON file or 'analytic'");
  invert->add_option("--traj", traj_arg, "evaluation trajectory index 1..10");
  invert->add_option("--T", flag_T, "expected history window of the model");
  invert->add_option("--dt-tap", flag_dt, "expected tap spacing of the model");
  invert->add_option("--l", flag_l, "expected derivative order of the model");
  add_common(invert, &config_path, &cfg);

  auto* reproduce = app.add_subcommand("reproduce", "run a full experiment sweep");
  std::string which = "table2";
  reproduce->add_option("which", which, "table2 | table3 | decay-fit")->required();
  reproduce->add_option("--dt", dt_taps, "tap spacings (s)");
  reproduce->add_option("--T", T_list, "history windows (s)");
  reproduce->add_option("--N", N_pool, "hidden widths");
  reproduce->add_option("--regime", cfg.regime, "noise-free | noisy | both");
  reproduce->add_option("--seeds", cfg.seeds, "seeds for the median");
  add_common(reproduce, &config_path, &cfg);

  auto* decay = app.add_subcommand("decay", "hidden-state estimate decay vs window length");
  decay->add_option("--T", T_list, "window lengths (s)");
  add_common(decay, &config_path, &cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      const invop::RunConfig flags = cfg;  // values parsed from the command line
      cfg = invop::RunConfig::from_json_file(config_path);
      for (auto* c : {sim, collect, train, invert, reproduce, decay}) {
        if (!c->parsed()) continue;
        if (c->count("--seed")) cfg.seed = flags.seed;
        if (c->count("--jobs")) cfg.jobs = flags.jobs;
        if (c->count("--out")) cfg.out_dir = flags.out_dir;
        if (c->count("--system")) cfg.system = flags.system;
        if (c->count("--base-rate")) cfg.base_rate_hz = flags.base_rate_hz;
        if (c->count("--regime")) cfg.regime = flags.regime;
        if (c->count("--mode")) cfg.mode = flags.mode;
        if (c->count("--seeds")) cfg.seeds = flags.seeds;
      }
    }
    if (!T_list.empty()) cfg.T_list = T_list;
    if (!dt_taps.empty()) cfg.dt_taps = dt_taps;
    if (!N_pool.empty()) cfg.N_pool = N_pool;
    if (flag_T && (collect->parsed() || train->parsed())) cfg.T_list = {*flag_T};
    if (flag_dt && (collect->parsed() || train->parsed())) cfg.dt_taps = {*flag_dt};
    if (flag_l) cfg.l = *flag_l;
    cfg.apply_env_overrides();

    if (sim->parsed()) return invop::cmd_simulate(cfg, sim_input);
    if (collect->parsed()) return invop::cmd_collect(cfg);
    if (train->parsed()) return invop::cmd_train(cfg);
    if (invert->parsed()) {
      return invop::cmd_invert(cfg, model_arg, traj_arg, flag_T, flag_dt, flag_l);
    }
    if (reproduce->parsed()) return invop::cmd_reproduce(cfg, which);
    if (decay->parsed()) return invop::cmd_decay(cfg);
  } catch (const invop::config_error& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return invop::kExitConfig;
  } catch (const invop::compat_error& ex) {
    std::cerr << "compatibility error: " << ex.what() << "\n";
    return invop::kExitCompat;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return invop::kExitNumeric;
  }
  return invop::kExitConfig;
}
