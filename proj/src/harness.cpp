#include "invop/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace invop {

double normalized_max_error(const Eigen::VectorXd& uhat, const Eigen::VectorXd& u_d) {
  if (uhat.size() != u_d.size()) throw std::invalid_argument("prediction grids are not aligned");
  const double denom = u_d.cwiseAbs().maxCoeff();
  if (denom <= 0.0) throw std::runtime_error("normalization undefined: zero reference input");
  return (uhat - u_d).cwiseAbs().maxCoeff() / denom * 100.0;
}

double normalized_max_error(const Trajectory& uhat, const Trajectory& u_d) {
  if (uhat.rows() != u_d.rows() || std::abs(uhat.dt - u_d.dt) > 1e-12) {
    throw std::invalid_argument("prediction grids are not aligned");
  }
  return normalized_max_error(Eigen::VectorXd(uhat.samples.col(0)),
                              Eigen::VectorXd(u_d.samples.col(0)));
}

MetricReport metric_report(const std::map<int, std::vector<double>>& per_traj) {
  if (per_traj.empty()) throw std::invalid_argument("no per-trajectory errors");
  MetricReport rep;
  rep.per_traj = per_traj;
  for (const auto& [N, errs] : per_traj) {
    if (errs.empty()) throw std::invalid_argument("empty error list");
    double sum = 0.0, mx = 0.0;
    for (double e : errs) {
      sum += e;
      mx = std::max(mx, e);
    }
    rep.e_uN[N] = sum / static_cast<double>(errs.size());
    rep.e_bar_uN[N] = mx;
  }
  rep.best_N = select_best(rep.e_uN);
  rep.e_u = rep.e_uN.at(rep.best_N);
  rep.e_bar_u = rep.e_bar_uN.at(rep.best_N);
  return rep;
}

EvalSuite build_eval_suite(const StateSpace& sys, double base_dt) {
  EvalSuite suite;
  suite.nf = normal_form(sys);
  suite.base_dt = base_dt;
  const auto samples = static_cast<Eigen::Index>(std::llround(10.0 / base_dt)) + 1;
  for (int k = 1; k <= 10; ++k) {
    Eigen::VectorXd y0(samples);
    for (Eigen::Index i = 0; i < samples; ++i) {
      y0(i) = nominal_trajectory(k, std::min(static_cast<double>(i) * base_dt, 10.0));
    }
    suite.filtered.push_back(filter_chain(make_trajectory(base_dt, 0.0, "y0", y0)));
  }
  suite.u_ideal = ideal_inverse_suite(suite.nf, suite.filtered, suite.nf.r);
  return suite;
}

std::vector<Trajectory> ideal_inverse_suite(const NormalForm& nf,
                                            const std::vector<FilteredTrajectory>& trajectories,
                                            int derivative_order_r) {
  if (derivative_order_r != nf.r) throw std::invalid_argument("relative degree mismatch");
  if (nf.r > 4) throw std::invalid_argument("filtered suite carries derivatives through order 4");
  std::vector<Trajectory> out;
  out.reserve(trajectories.size());
  for (const auto& ft : trajectories) {
    const Trajectory y_d = make_trajectory(ft.derivatives.dt, ft.derivatives.t0, "y",
                                           ft.derivatives.samples.col(0));
    const Trajectory eta = hidden_state_full(nf, y_d);
    const auto m = ft.derivatives.rows();
    Eigen::VectorXd u(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::VectorXd xi(nf.r);
      for (int d = 0; d < nf.r; ++d) xi(d) = ft.derivatives.samples(i, d);
      const double yr = ft.derivatives.samples(i, nf.r);
      u(i) = exact_inverse_input(nf, xi, yr, eta.samples.row(i).transpose());
    }
    out.push_back(make_trajectory(ft.derivatives.dt, ft.derivatives.t0, "u_d", u));
  }
  return out;
}

DerivativeStack eval_stack(const FilteredTrajectory& filtered, const Trajectory& u_ideal) {
  DerivativeStack stack;
  stack.signals = filtered.derivatives;
  stack.signals.channels = {"y", "y1", "y2", "y3", "y4"};
  stack.u = u_ideal;
  stack.margin34 = 0;
  stack.padded_history = true;
  return stack;
}

std::vector<double> evaluate_on_suite(const MlpModel& model, const EvalSuite& suite) {
  std::vector<double> errors;
  errors.reserve(suite.filtered.size());
  for (size_t k = 0; k < suite.filtered.size(); ++k) {
    const Dataset ds = build_dataset(eval_stack(suite.filtered[k], suite.u_ideal[k]), model.spec);
    errors.push_back(normalized_max_error(predict(model, ds.X), ds.y_target));
  }
  return errors;
}

std::vector<double> closed_loop_errors(const StateSpace& sys, const EvalSuite& suite) {
  std::vector<double> errors;
  errors.reserve(suite.filtered.size());
  for (size_t k = 0; k < suite.filtered.size(); ++k) {
    const Trajectory traj = simulate(sys, suite.u_ideal[k], Eigen::VectorXd::Zero(sys.n()));
    const Eigen::VectorXd y = traj.col("y");
    const Eigen::VectorXd y_d = suite.filtered[k].derivatives.samples.col(0);
    const double denom = y_d.cwiseAbs().maxCoeff();
    if (denom <= 0.0) throw std::runtime_error("normalization undefined: zero desired output");
    errors.push_back((y - y_d).cwiseAbs().maxCoeff() / denom * 100.0);
  }
  return errors;
}

DerivativeStack collect_training_record(const StateSpace& sys, const ExcitationSpec& excitation,
                                        double base_dt, bool noisy, double snr, bool snr_is_db,
                                        std::uint64_t noise_seed) {
  const NormalForm nf = normal_form(sys);
  const int r = nf.r;
  const Trajectory u = excitation_signal(excitation, base_dt);
  const Trajectory traj = simulate(sys, u, Eigen::VectorXd::Zero(sys.n()));
  const auto m = traj.rows();
  const auto nn = sys.n();
  const Eigen::MatrixXd states = traj.samples.leftCols(nn);
  const Eigen::VectorXd uin = u.samples.col(0);

  Eigen::MatrixXd channels(m, 5);
  Eigen::RowVectorXd row = sys.C;  // C A^d
  const int highest_exact = std::min(r, 4);
  double lead = 0.0;
  for (int d = 0; d <= highest_exact; ++d) {
    channels.col(d) = states * row.transpose();
    if (d == r) channels.col(d) += lead * uin;  // direct term C A^(r-1) B u
    if (d == r - 1) lead = row * sys.B;
    row = row * sys.A;
  }

  Eigen::Index margin = 0;
  int highest = highest_exact;
  while (highest < 4) {
    Trajectory src = make_trajectory(base_dt, 0.0, "d", channels.col(highest));
    const StencilDerivatives sten = finite_difference_34(src);
    channels.col(highest + 1) = sten.y3.samples.col(0);
    if (highest + 2 <= 4) channels.col(highest + 2) = sten.y4.samples.col(0);
    margin += sten.margin;
    highest += 2;
  }

  DerivativeStack stack;
  stack.signals.dt = base_dt;
  stack.signals.t0 = 0.0;
  stack.signals.channels = {"y", "y1", "y2", "y3", "y4"};
  stack.signals.samples = channels;
  stack.u = u;
  stack.margin34 = margin;
  stack.padded_history = false;
  if (noisy) stack.signals = add_awgn(stack.signals, snr, noise_seed, snr_is_db);
  return stack;
}

void parallel_for(int jobs, Eigen::Index count, const std::function<void(Eigen::Index)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Eigen::Index>(jobs, count));
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DecayFit fit_exponential_decay(const std::vector<double>& T, const std::vector<double>& e,
                               double floor_pct) {
  if (T.size() != e.size()) throw std::invalid_argument("fit inputs are not aligned");
  std::vector<double> Ts, Ls, Ws;
  for (size_t i = 0; i < T.size(); ++i) {
    if (e[i] >= floor_pct && e[i] > 0.0) {
      Ts.push_back(T[i]);
      Ls.push_back(std::log(e[i]));
      Ws.push_back(e[i]);
    }
  }
  DecayFit fit;
  fit.points_used = static_cast<int>(Ts.size());
  if (Ts.size() < 2) throw std::runtime_error("too few non-floor cells for a decay fit");

  auto solve = [&](const std::vector<double>& w, double* beta, double* alpha) {
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    for (size_t i = 0; i < Ts.size(); ++i) {
      sw += w[i];
      st += w[i] * Ts[i];
      sl += w[i] * Ls[i];
      stt += w[i] * Ts[i] * Ts[i];
      stl += w[i] * Ts[i] * Ls[i];
    }
    const double det = sw * stt - st * st;
    const double slope = (sw * stl - st * sl) / det;
    const double inter = (sl - slope * st) / sw;
    *alpha = -slope;
    *beta = std::exp(inter);
  };
  solve(Ws, &fit.beta, &fit.alpha);
  std::vector<double> ones(Ts.size(), 1.0);
  solve(ones, &fit.beta_unweighted, &fit.alpha_unweighted);

  double ss = 0.0;
  for (size_t i = 0; i < Ts.size(); ++i) {
    const double r = Ls[i] - (std::log(fit.beta) - fit.alpha * Ts[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(Ts.size()));
  return fit;
}

namespace {

std::uint64_t cell_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d) {
  return seed_mix(seed_mix(seed_mix(seed_mix(master, a), b), c), d);
}

struct CellOutput {
  MetricReport report;
  bool ok = false;
  std::string error;
};

double median_or_nan(const std::vector<double>& values) {
  return values.empty() ? std::numeric_limits<double>::quiet_NaN() : median(values);
}

}  // namespace

SweepResult sweep_history(const SweepConfig& cfg) {
  const EvalSuite suite = build_eval_suite(cfg.sys, cfg.base_dt);

  // per-seed training records (noise differs per seed in the noisy regime)
  std::vector<DerivativeStack> records(static_cast<size_t>(cfg.seeds));
  for (int s = 0; s < cfg.seeds; ++s) {
    records[static_cast<size_t>(s)] =
        collect_training_record(cfg.sys, cfg.excitation, cfg.base_dt, cfg.noisy, cfg.snr,
                                cfg.snr_is_db, cell_seed(cfg.master_seed, 0xA0, s, 0, 0));
  }

  const auto nT = cfg.T_list.size();
  const auto nD = cfg.dt_taps.size();
  const auto cells = static_cast<Eigen::Index>(nT * nD * static_cast<size_t>(cfg.seeds));
  std::vector<CellOutput> outputs(static_cast<size_t>(cells));

  parallel_for(cfg.jobs, cells, [&](Eigen::Index job) {
    auto& out = outputs[static_cast<size_t>(job)];
    try {
      const auto s = static_cast<int>(job % cfg.seeds);
      const auto di = static_cast<size_t>(job / cfg.seeds) % nD;
      const auto ti = static_cast<size_t>(job / cfg.seeds) / nD;
      FeatureSpec spec;
      spec.T = cfg.T_list[ti];
      spec.dt_tap = cfg.dt_taps[di];
      spec.l = 2;
      spec.mode = FeatureMode::HistoryDerivatives;
      const Dataset ds = build_dataset(records[static_cast<size_t>(s)], spec);

      std::map<int, std::vector<double>> per_traj;
      for (int N : cfg.N_pool) {
        const MlpModel model =
            train_mlp(ds, N, cell_seed(cfg.master_seed, ti, di, static_cast<std::uint64_t>(N), s),
                      cfg.budget);
        per_traj[N] = evaluate_on_suite(model, suite);
      }
      out.report = metric_report(per_traj);
      out.ok = true;
    } catch (const std::exception& ex) {
      out.error = ex.what();  // recorded; the sweep continues
    }
  });

  auto at = [&](size_t ti, size_t di, int s) -> const MetricReport& {
    return outputs[(ti * nD + di) * static_cast<size_t>(cfg.seeds) + static_cast<size_t>(s)].report;
  };

  auto ok_at = [&](size_t ti, size_t di, int s) {
    return outputs[(ti * nD + di) * static_cast<size_t>(cfg.seeds) + static_cast<size_t>(s)].ok;
  };

  SweepResult result;
  result.T_list = cfg.T_list;
  for (size_t ti = 0; ti < nT; ++ti) {
    for (size_t di = 0; di < nD; ++di) {
      for (int N : cfg.N_pool) {
        std::vector<double> means, maxes;
        for (int s = 0; s < cfg.seeds; ++s) {
          if (!ok_at(ti, di, s)) continue;
          means.push_back(at(ti, di, s).e_uN.at(N));
          maxes.push_back(at(ti, di, s).e_bar_uN.at(N));
        }
        result.cells.push_back(
            {cfg.T_list[ti], cfg.dt_taps[di], N, median_or_nan(means), median_or_nan(maxes)});
      }
    }
  }
  for (size_t ti = 0; ti < nT; ++ti) {
    std::vector<double> e_us;
    for (int s = 0; s < cfg.seeds; ++s) {
      if (ok_at(ti, 0, s)) e_us.push_back(at(ti, 0, s).e_u);
    }
    result.e_u.push_back(median_or_nan(e_us));
  }
  result.fit = fit_exponential_decay(result.T_list, result.e_u);

  std::string csv = "# master_seed=" + std::to_string(cfg.master_seed) +
                    " seeds=" + std::to_string(cfg.seeds) +
                    " regime=" + (cfg.noisy ? std::string("noisy") : std::string("noise-free")) +
                    "\n";
  csv += "T,N,e_uN_pct,e_bar_uN_pct,dt\n";
  for (const auto& c : result.cells) {
    csv += format_double(c.T) + "," + std::to_string(c.N) + "," + format_double(c.e_uN) + "," +
           format_double(c.e_bar_uN) + "," + format_double(c.dt_tap) + "\n";
  }
  result.table_csv = csv;

  std::string fit_csv = "# master_seed=" + std::to_string(cfg.master_seed) +
                        " weighting=log-space LS weighted by e_u, floor_pct=0.005" +
                        " unweighted: beta=" + format_double(result.fit.beta_unweighted) +
                        " alpha=" + format_double(result.fit.alpha_unweighted) + "\n";
  fit_csv += "beta,alpha,residual\n";
  fit_csv += format_double(result.fit.beta) + "," + format_double(result.fit.alpha) + "," +
             format_double(result.fit.residual) + "\n";
  result.fit_csv = fit_csv;
  return result;
}

AblationResult sweep_derivatives(const SweepConfig& cfg, const std::string& regimes) {
  const EvalSuite suite = build_eval_suite(cfg.sys, cfg.base_dt);
  const double T = cfg.T_list.front();
  const double dt_tap = cfg.dt_taps.front();

  struct Operator {
    std::string name;
    FeatureMode mode;
    int l;
  };
  const std::vector<Operator> ops = {
      {"Gd0", FeatureMode::HistoryDerivatives, 0}, {"Gd1", FeatureMode::HistoryDerivatives, 1},
      {"Gd2", FeatureMode::HistoryDerivatives, 2}, {"Gd3", FeatureMode::HistoryDerivatives, 3},
      {"Gd4", FeatureMode::HistoryDerivatives, 4}, {"NARX", FeatureMode::Narx, 0},
      {"NARXstar", FeatureMode::NarxStar, 2}};

  std::vector<bool> noisy_flags;
  if (regimes == "both") {
    noisy_flags = {false, true};
  } else if (regimes == "noise-free") {
    noisy_flags = {false};
  } else if (regimes == "noisy") {
    noisy_flags = {true};
  } else {
    throw std::invalid_argument("unknown regime '" + regimes + "'");
  }

  AblationResult result;
  std::string csv = "# master_seed=" + std::to_string(cfg.master_seed) +
                    " seeds=" + std::to_string(cfg.seeds) + " T=" + format_double(T) +
                    " dt=" + format_double(dt_tap) + "\n";
  csv += "operator,regime,e_u_pct,e_bar_u_pct\n";

  for (bool noisy : noisy_flags) {
    std::vector<DerivativeStack> records(static_cast<size_t>(cfg.seeds));
    for (int s = 0; s < cfg.seeds; ++s) {
      records[static_cast<size_t>(s)] = collect_training_record(
          cfg.sys, cfg.excitation, cfg.base_dt, noisy, cfg.snr, cfg.snr_is_db,
          cell_seed(cfg.master_seed, 0xB0 + (noisy ? 1 : 0), s, 0, 0));
    }
    const auto jobs = static_cast<Eigen::Index>(ops.size() * static_cast<size_t>(cfg.seeds));
    std::vector<CellOutput> reports(static_cast<size_t>(jobs));
    parallel_for(cfg.jobs, jobs, [&](Eigen::Index job) {
      auto& out = reports[static_cast<size_t>(job)];
      try {
        const auto s = static_cast<int>(job % cfg.seeds);
        const auto oi = static_cast<size_t>(job / cfg.seeds);
        FeatureSpec spec;
        spec.T = T;
        spec.dt_tap = dt_tap;
        spec.l = ops[oi].l;
        spec.mode = ops[oi].mode;
        const Dataset ds = build_dataset(records[static_cast<size_t>(s)], spec);
        std::map<int, std::vector<double>> per_traj;
        for (int N : cfg.N_pool) {
          const MlpModel model =
              train_mlp(ds, N,
                        cell_seed(cfg.master_seed, 0xC0 + (noisy ? 1 : 0), oi,
                                  static_cast<std::uint64_t>(N), s),
                        cfg.budget);
          per_traj[N] = evaluate_on_suite(model, suite);
        }
        out.report = metric_report(per_traj);
        out.ok = true;
      } catch (const std::exception& ex) {
        out.error = ex.what();
      }
    });

    for (size_t oi = 0; oi < ops.size(); ++oi) {
      std::vector<double> e_us, e_bars;
      for (int s = 0; s < cfg.seeds; ++s) {
        const auto& cell = reports[oi * static_cast<size_t>(cfg.seeds) + static_cast<size_t>(s)];
        if (!cell.ok) continue;
        e_us.push_back(cell.report.e_u);
        e_bars.push_back(cell.report.e_bar_u);
      }
      AblationRow row{ops[oi].name, noisy ? "noisy" : "noise-free", median_or_nan(e_us),
                      median_or_nan(e_bars)};
      result.rows.push_back(row);
      csv += row.op_name + "," + row.regime + "," + format_double(row.e_u) + "," +
             format_double(row.e_bar_u) + "\n";
    }
  }
  result.table_csv = csv;
  return result;
}

HiddenDecayResult hidden_decay_experiment(const StateSpace& sys, const ExcitationSpec& excitation,
                                          const std::vector<double>& T_list, double base_dt,
                                          Eigen::Index eval_stride) {
  const NormalForm nf = normal_form(sys);
  const Trajectory u = excitation_signal(excitation, base_dt);
  const Trajectory traj = simulate(sys, u, Eigen::VectorXd::Zero(sys.n()));
  const Trajectory y = make_trajectory(base_dt, 0.0, "y", traj.col("y"));
  const Trajectory eta_ref = hidden_state_full(nf, y);

  const double M = y.samples.col(0).cwiseAbs().maxCoeff();
  const double Tmax = *std::max_element(T_list.begin(), T_list.end());
  const auto grid_n = 2000;
  Eigen::VectorXd grid(grid_n);
  for (int i = 0; i < grid_n; ++i) grid(i) = 2.0 * Tmax * i / (grid_n - 1);
  const DecayBound bound = decay_bound(nf, M, grid);

  HiddenDecayResult result;
  result.T_list = T_list;
  result.bound = bound;
  const Eigen::VectorXd ysig = y.samples.col(0);
  for (double T : T_list) {
    const auto w = static_cast<Eigen::Index>(std::llround(T / base_dt));
    double worst = 0.0;
    for (Eigen::Index t = w; t < y.rows(); t += eval_stride) {
      const HiddenStateEstimate est =
          hidden_state_window(nf, ysig.segment(t - w, w + 1), base_dt);
      worst = std::max(worst, (eta_ref.samples.row(t).transpose() - est.eta).norm());
    }
    result.measured.push_back(worst);
    result.envelope.push_back(bound.envelope(T));
  }
  const DecayFit fit = fit_exponential_decay(result.T_list, result.measured, 0.0);
  result.fitted_rate = fit.alpha_unweighted;

  std::string csv = "T,measured_err,bound\n";
  for (size_t i = 0; i < T_list.size(); ++i) {
    csv += format_double(T_list[i]) + "," + format_double(result.measured[i]) + "," +
           format_double(result.envelope[i]) + "\n";
  }
  result.csv = csv;
  return result;
}

}  // namespace invop
