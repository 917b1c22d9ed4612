#include "invop/app.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace invop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& ex) {
    throw config_error("bad JSON in '" + path + "': " + ex.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
}

std::string seeded_header(const RunConfig& cfg) {
  return "# master_seed=" + std::to_string(cfg.seed) + "\n";
}

}  // namespace

StateSpace RunConfig::load_system() const {
  if (system == "example") return build_example_system();
  return load_state_space(system);
}

ExcitationSpec RunConfig::load_excitation() const {
  if (excitation_file.empty()) return ExcitationSpec::paper_default();
  try {
    return ExcitationSpec::from_file(excitation_file);
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  const json j = read_json_file(path);
  RunConfig cfg;
  try {
    cfg.system = j.value("system", cfg.system);
    cfg.base_rate_hz = j.value("base_rate_hz", cfg.base_rate_hz);
    if (j.contains("T_list")) cfg.T_list = j.at("T_list").get<std::vector<double>>();
    if (j.contains("dt_taps")) cfg.dt_taps = j.at("dt_taps").get<std::vector<double>>();
    if (j.contains("N_pool")) cfg.N_pool = j.at("N_pool").get<std::vector<int>>();
    cfg.l = j.value("l", cfg.l);
    cfg.mode = j.value("mode", cfg.mode);
    cfg.regime = j.value("regime", cfg.regime);
    cfg.snr = j.value("snr", cfg.snr);
    cfg.snr_is_db = j.value("snr_is_db", cfg.snr_is_db);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.excitation_file = j.value("excitation_file", cfg.excitation_file);
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      cfg.budget.max_epochs = b.value("max_epochs", cfg.budget.max_epochs);
      cfg.budget.patience = b.value("patience", cfg.budget.patience);
      cfg.budget.learning_rate = b.value("learning_rate", cfg.budget.learning_rate);
      cfg.budget.ridge = b.value("ridge", cfg.budget.ridge);
      cfg.budget.init_scale = b.value("init_scale", cfg.budget.init_scale);
      cfg.budget.val_fraction = b.value("val_fraction", cfg.budget.val_fraction);
    }
  } catch (const json::exception& ex) {
    throw config_error("bad config value: " + std::string(ex.what()));
  }
  return cfg;
}

void RunConfig::apply_env_overrides() {
  if (const char* s = std::getenv("INVOP_SEED")) {
    try {
      seed = std::stoull(s);
    } catch (const std::exception&) {
      throw config_error("INVOP_SEED is not an integer");
    }
  }
  if (const char* s = std::getenv("INVOP_OUT")) out_dir = s;
}

void save_state_space(const StateSpace& sys, const std::string& path) {
  json j;
  j["A"] = json::array();
  for (Eigen::Index i = 0; i < sys.n(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < sys.n(); ++k) row.push_back(sys.A(i, k));
    j["A"].push_back(row);
  }
  j["B"] = json::array();
  for (Eigen::Index i = 0; i < sys.n(); ++i) j["B"].push_back(sys.B(i));
  j["C"] = json::array();
  for (Eigen::Index i = 0; i < sys.n(); ++i) j["C"].push_back(sys.C(i));
  write_file(path, j.dump(1) + "\n");
}

StateSpace load_state_space(const std::string& path) {
  const json j = read_json_file(path);
  StateSpace sys;
  try {
    const auto& A = j.at("A");
    const auto nn = static_cast<Eigen::Index>(A.size());
    sys.A.resize(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
      for (Eigen::Index k = 0; k < nn; ++k) {
        sys.A(i, k) = A[static_cast<size_t>(i)][static_cast<size_t>(k)];
      }
    }
    sys.B.resize(nn);
    sys.C.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
      sys.B(i) = j.at("B")[static_cast<size_t>(i)];
      sys.C(i) = j.at("C")[static_cast<size_t>(i)];
    }
  } catch (const json::exception& ex) {
    throw config_error("bad state-space file: " + std::string(ex.what()));
  }
  try {
    sys.validate();
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
  return sys;
}

namespace {

// u, y and derivative channels on one grid, written as one CSV
std::string record_csv(const RunConfig& cfg, const DerivativeStack& stack) {
  Trajectory all;
  all.dt = stack.signals.dt;
  all.t0 = stack.signals.t0;
  all.channels = {"u", "y", "y1", "y2", "y3", "y4"};
  all.samples.resize(stack.signals.rows(), 6);
  all.samples.col(0) = stack.u.samples.col(0);
  all.samples.rightCols(5) = stack.signals.samples;
  return seeded_header(cfg) + all.to_csv();
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const std::string& input) {
  const StateSpace sys = cfg.load_system();
  const double dt = cfg.base_dt();
  fs::create_directories(cfg.out_dir);

  if (input == "excitation") {
    const DerivativeStack stack = collect_training_record(sys, cfg.load_excitation(), dt,
                                                          /*noisy=*/false, cfg.snr, cfg.snr_is_db, 0);
    write_file(cfg.out_dir + "/sim_excitation.csv", record_csv(cfg, stack));
    std::cout << "wrote " << cfg.out_dir << "/sim_excitation.csv\n";
    return kExitOk;
  }
  if (input == "step" || input == "zero") {
    const double duration = 3.0;
    auto u = [&](double t) { return input == "step" && t >= 0.0 ? 1.0 : 0.0; };
    const Trajectory traj = simulate(sys, u, Eigen::VectorXd::Zero(sys.n()), dt, duration);
    // derivative channels via repeated central differences, as in the
    // step-response identification
    const Eigen::VectorXd y = traj.col("y");
    Trajectory out;
    out.dt = dt;
    out.channels = {"u", "y", "y1", "y2", "y3", "y4"};
    out.samples.resize(traj.rows(), 6);
    for (Eigen::Index i = 0; i < traj.rows(); ++i) out.samples(i, 0) = u(out.time(i));
    out.samples.col(1) = y;
    Eigen::VectorXd d = y;
    for (int order = 1; order <= 4; ++order) {
      Eigen::VectorXd next(d.size());
      for (Eigen::Index i = 1; i + 1 < d.size(); ++i) next(i) = (d(i + 1) - d(i - 1)) / (2 * dt);
      next(0) = next.size() > 2 ? next(1) : 0.0;
      next(d.size() - 1) = next.size() > 2 ? next(d.size() - 2) : 0.0;
      out.samples.col(1 + order) = next;
      d = next;
    }
    const std::string path = cfg.out_dir + "/sim_" + input + ".csv";
    write_file(path, seeded_header(cfg) + out.to_csv());
    std::cout << "wrote " << path << "\n";
    return kExitOk;
  }
  if (input.rfind("traj:", 0) == 0) {
    int k = 0;
    try {
      k = std::stoi(input.substr(5));
    } catch (const std::exception&) {
      throw config_error("bad trajectory index in '" + input + "'");
    }
    if (k < 1 || k > 10) throw config_error("trajectory index must be in 1..10");
    const EvalSuite suite = build_eval_suite(sys, dt);
    const Trajectory sim = simulate(sys, suite.u_ideal[static_cast<size_t>(k - 1)],
                                    Eigen::VectorXd::Zero(sys.n()));
    Trajectory out;
    out.dt = dt;
    out.channels = {"u_d", "y", "y_d"};
    out.samples.resize(sim.rows(), 3);
    out.samples.col(0) = suite.u_ideal[static_cast<size_t>(k - 1)].samples.col(0);
    out.samples.col(1) = sim.col("y");
    out.samples.col(2) = suite.filtered[static_cast<size_t>(k - 1)].derivatives.samples.col(0);
    const std::string path = cfg.out_dir + "/sim_traj" + std::to_string(k) + ".csv";
    write_file(path, seeded_header(cfg) + out.to_csv());
    std::cout << "wrote " << path << "\n";
    return kExitOk;
  }
  // trajectory CSV as the input signal
  Trajectory u;
  try {
    u = Trajectory::load_csv(input);
    u.validate();
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
  const Trajectory traj = simulate(sys, u, Eigen::VectorXd::Zero(sys.n()));
  const std::string path = cfg.out_dir + "/sim_custom.csv";
  write_file(path, seeded_header(cfg) + traj.to_csv());
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

namespace {

FeatureSpec spec_from_config(const RunConfig& cfg) {
  FeatureSpec spec;
  spec.T = cfg.T_list.front();
  spec.dt_tap = cfg.dt_taps.front();
  spec.l = cfg.l;
  try {
    spec.mode = feature_mode_from_string(cfg.mode);
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
  try {
    spec.validate(cfg.base_dt());
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
  return spec;
}

DerivativeStack record_from_config(const RunConfig& cfg, int seed_index) {
  const bool noisy = cfg.regime == "noisy";
  return collect_training_record(cfg.load_system(), cfg.load_excitation(), cfg.base_dt(), noisy,
                                 cfg.snr, cfg.snr_is_db,
                                 seed_mix(seed_mix(cfg.seed, 0xA0), seed_index));
}

}  // namespace

int cmd_collect(const RunConfig& cfg) {
  const FeatureSpec spec = spec_from_config(cfg);
  const Dataset ds = build_dataset(record_from_config(cfg, 0), spec);
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/dataset.csv";
  write_file(path, seeded_header(cfg) + ds.to_csv());
  std::cout << "wrote " << path << " (" << ds.X.rows() << " rows, width " << ds.X.cols() << ")\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  const FeatureSpec spec = spec_from_config(cfg);
  const StateSpace sys = cfg.load_system();
  const Dataset ds = build_dataset(record_from_config(cfg, 0), spec);
  const EvalSuite suite = build_eval_suite(sys, cfg.base_dt());
  fs::create_directories(cfg.out_dir);

  std::map<int, std::vector<double>> per_traj;
  for (int N : cfg.N_pool) {
    const MlpModel model = train_mlp(ds, N, seed_mix(cfg.seed, static_cast<std::uint64_t>(N)),
                                     cfg.budget);
    per_traj[N] = evaluate_on_suite(model, suite);
    model.save(cfg.out_dir + "/model_N" + std::to_string(N) + ".json");
  }
  const MetricReport rep = metric_report(per_traj);
  std::string csv = seeded_header(cfg) + "N,e_uN_pct,e_bar_uN_pct\n";
  for (int N : cfg.N_pool) {
    csv += std::to_string(N) + "," + format_double(rep.e_uN.at(N)) + "," +
           format_double(rep.e_bar_uN.at(N)) + "\n";
  }
  write_file(cfg.out_dir + "/pool_report.csv", csv);
  std::cout << "best N=" << rep.best_N << " e_u=" << format_double(rep.e_u)
            << "% e_bar_u=" << format_double(rep.e_bar_u) << "%\n";
  return kExitOk;
}

int cmd_invert(const RunConfig& cfg, const std::string& model_arg, const std::string& traj,
               std::optional<double> expect_T, std::optional<double> expect_dt,
               std::optional<int> expect_l) {
  const StateSpace sys = cfg.load_system();
  const double dt = cfg.base_dt();
  int k = 0;
  try {
    k = std::stoi(traj);
  } catch (const std::exception&) {
    throw config_error("trajectory must be an index in 1..10");
  }
  if (k < 1 || k > 10) throw config_error("trajectory index must be in 1..10");
  const EvalSuite suite = build_eval_suite(sys, dt);
  const auto& u_d = suite.u_ideal[static_cast<size_t>(k - 1)];
  fs::create_directories(cfg.out_dir);

  if (model_arg == "analytic") {
    const Trajectory sim = simulate(sys, u_d, Eigen::VectorXd::Zero(sys.n()));
    const Eigen::VectorXd y = sim.col("y");
    const Eigen::VectorXd y_d = suite.filtered[static_cast<size_t>(k - 1)].derivatives.samples.col(0);
    const double err = (y - y_d).cwiseAbs().maxCoeff() / y_d.cwiseAbs().maxCoeff() * 100.0;
    write_file(cfg.out_dir + "/ud_k" + std::to_string(k) + ".csv", seeded_header(cfg) + u_d.to_csv());
    std::cout << "closed-loop tracking error k=" << k << ": " << format_double(err) << "%\n";
    return kExitOk;
  }

  MlpModel model;
  try {
    model = MlpModel::load(model_arg);
  } catch (const std::exception& ex) {
    throw config_error(ex.what());
  }
  if ((expect_T && std::abs(*expect_T - model.spec.T) > 1e-12) ||
      (expect_dt && std::abs(*expect_dt - model.spec.dt_tap) > 1e-12) ||
      (expect_l && *expect_l != model.spec.l)) {
    throw compat_error("requested feature spec does not match the model");
  }
  try {
    model.spec.validate(dt);
  } catch (const std::exception& ex) {
    throw compat_error(ex.what());
  }

  const Dataset ds =
      build_dataset(eval_stack(suite.filtered[static_cast<size_t>(k - 1)], u_d), model.spec);
  const Eigen::VectorXd uhat = predict(model, ds.X);
  const double err = normalized_max_error(uhat, ds.y_target);
  Trajectory out = make_trajectory(dt, 0.0, "u_hat", uhat);
  write_file(cfg.out_dir + "/uhat_k" + std::to_string(k) + ".csv",
             seeded_header(cfg) + out.to_csv());
  std::cout << "prediction error k=" << k << ": " << format_double(err) << "%\n";
  return kExitOk;
}

namespace {

SweepConfig sweep_config(const RunConfig& cfg) {
  SweepConfig sc;
  sc.sys = cfg.load_system();
  sc.excitation = cfg.load_excitation();
  sc.base_dt = cfg.base_dt();
  sc.T_list = cfg.T_list;
  sc.dt_taps = cfg.dt_taps;
  sc.N_pool = cfg.N_pool;
  sc.seeds = cfg.seeds;
  sc.master_seed = cfg.seed;
  sc.noisy = cfg.regime == "noisy";
  sc.snr = cfg.snr;
  sc.snr_is_db = cfg.snr_is_db;
  sc.budget = cfg.budget;
  sc.jobs = cfg.jobs;
  return sc;
}

}  // namespace

int cmd_reproduce(const RunConfig& cfg, const std::string& which) {
  fs::create_directories(cfg.out_dir);
  if (which == "table2" || which == "decay-fit") {
    const SweepResult result = sweep_history(sweep_config(cfg));
    bool any_cell = false;
    for (const auto& c : result.cells) any_cell = any_cell || std::isfinite(c.e_uN);
    if (which == "table2") write_file(cfg.out_dir + "/table2.csv", result.table_csv);
    write_file(cfg.out_dir + "/decay_fit.csv", result.fit_csv);
    std::cout << "e_u(T): ";
    for (double e : result.e_u) std::cout << format_double(e) << " ";
    std::cout << "\nfit: beta=" << format_double(result.fit.beta)
              << " alpha=" << format_double(result.fit.alpha) << "\n";
    return any_cell ? kExitOk : kExitNumeric;
  }
  if (which == "table3") {
    const std::string regimes = cfg.regime == "both" ? "both" : cfg.regime;
    const AblationResult result = sweep_derivatives(sweep_config(cfg), regimes);
    write_file(cfg.out_dir + "/table3.csv", result.table_csv);
    bool any = false;
    for (const auto& row : result.rows) any = any || std::isfinite(row.e_u);
    std::cout << result.table_csv;
    return any ? kExitOk : kExitNumeric;
  }
  throw config_error("unknown reproduce target '" + which + "'");
}

int cmd_decay(const RunConfig& cfg) {
  const HiddenDecayResult result =
      hidden_decay_experiment(cfg.load_system(), cfg.load_excitation(), cfg.T_list, cfg.base_dt());
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/decay.csv", seeded_header(cfg) + result.csv);
  std::cout << "fitted decay rate: " << format_double(result.fitted_rate)
            << " (bound alpha1=" << format_double(result.bound.alpha1)
            << ", kappa1=" << format_double(result.bound.kappa1) << ")\n";
  return kExitOk;
}

}  // namespace invop
