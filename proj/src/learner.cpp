#include "invop/learner.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace invop {

using nlohmann::json;

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::HistoryDerivatives: return "history-derivatives";
    case FeatureMode::Narx: return "narx";
    case FeatureMode::NarxStar: return "narx-star";
  }
  throw std::logic_error("unknown feature mode");
}

FeatureMode feature_mode_from_string(const std::string& name) {
  if (name == "history-derivatives") return FeatureMode::HistoryDerivatives;
  if (name == "narx") return FeatureMode::Narx;
  if (name == "narx-star") return FeatureMode::NarxStar;
  throw std::invalid_argument("unknown feature mode '" + name + "'");
}

int FeatureSpec::history_taps() const {
  return static_cast<int>(std::llround(T / dt_tap)) + 1;
}

int FeatureSpec::width() const {
  const int m_T = history_taps() - 1;
  return history_taps() + (l + 1) + (uses_input_taps() ? m_T : 0);
}

void FeatureSpec::validate(double base_dt) const {
  if (!(dt_tap > 0.0) || !(base_dt > 0.0)) throw std::invalid_argument("tap spacing must be positive");
  const double m_T = T / dt_tap;
  if (m_T < 1.0 - 1e-9 || std::abs(m_T - std::round(m_T)) > 1e-9 * std::max(1.0, m_T)) {
    throw std::invalid_argument("T/dt_tap must be a positive integer");
  }
  const double stride = dt_tap / base_dt;
  if (std::abs(stride - std::round(stride)) > 1e-9 * stride || stride < 1.0 - 1e-9) {
    throw std::invalid_argument("dt_tap must be an integer multiple of the base period");
  }
  if (l < 0 || l > 4) throw std::invalid_argument("derivative order l must be in 0..4");
  if (mode == FeatureMode::Narx && l != 0) throw std::invalid_argument("narx mode carries l = 0");
  if (mode == FeatureMode::NarxStar && l != 2) throw std::invalid_argument("narx-star mode carries l = 2");
}

std::vector<std::string> FeatureSpec::feature_names() const {
  std::vector<std::string> names;
  const int m_T = history_taps() - 1;
  for (int j = m_T; j >= 0; --j) names.push_back("y[m-" + std::to_string(j) + "]");
  for (int d = 0; d <= l; ++d) names.push_back("d" + std::to_string(d) + "[m]");
  if (uses_input_taps()) {
    for (int j = m_T; j >= 1; --j) names.push_back("u[m-" + std::to_string(j) + "]");
  }
  return names;
}

std::string Dataset::to_csv() const {
  std::string out = "t";
  for (const auto& name : spec.feature_names()) out += "," + name;
  out += ",u[m]\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out += format_double(sample_times[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < X.cols(); ++j) out += "," + format_double(X(i, j));
    out += "," + format_double(y_target(i)) + "\n";
  }
  return out;
}

Dataset build_dataset(const DerivativeStack& stack, const FeatureSpec& spec) {
  stack.signals.validate();
  stack.u.validate();
  if (stack.signals.rows() != stack.u.rows()) {
    throw std::invalid_argument("signal and input records are not aligned");
  }
  const double base_dt = stack.signals.dt;
  spec.validate(base_dt);

  const auto stride = static_cast<Eigen::Index>(std::llround(spec.dt_tap / base_dt));
  const int m_T = spec.history_taps() - 1;
  const auto rows = stack.signals.rows();
  const bool needs34 = spec.l >= 3;
  const Eigen::Index margin = needs34 ? stack.margin34 : 0;

  Eigen::Index first = margin;
  if (!stack.padded_history) first = std::max<Eigen::Index>(first, m_T * stride);
  const Eigen::Index last = rows - 1 - margin;
  if (first > last) throw std::runtime_error("no valid dataset rows");

  Dataset ds;
  ds.spec = spec;
  ds.X.resize(last - first + 1, spec.width());
  ds.y_target.resize(last - first + 1);
  ds.sample_times.reserve(static_cast<size_t>(last - first + 1));

  const auto& sig = stack.signals.samples;
  const auto& uin = stack.u.samples;
  for (Eigen::Index m = first; m <= last; ++m) {
    const Eigen::Index row = m - first;
    Eigen::Index c = 0;
    for (int j = m_T; j >= 0; --j) {
      const Eigen::Index idx = m - static_cast<Eigen::Index>(j) * stride;
      ds.X(row, c++) = idx >= 0 ? sig(idx, 0) : 0.0;
    }
    for (int d = 0; d <= spec.l; ++d) ds.X(row, c++) = sig(m, d);
    if (spec.uses_input_taps()) {
      for (int j = m_T; j >= 1; --j) {
        const Eigen::Index idx = m - static_cast<Eigen::Index>(j) * stride;
        ds.X(row, c++) = idx >= 0 ? uin(idx, 0) : 0.0;
      }
    }
    ds.y_target(row) = uin(m, 0);
    ds.sample_times.push_back(stack.signals.time(m));
  }
  return ds;
}

namespace {

struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> val;
};

Split make_split(const std::vector<double>& times, double cycle, double val_fraction) {
  Split sp;
  const double threshold = cycle * (1.0 - val_fraction);
  for (size_t i = 0; i < times.size(); ++i) {
    const double phase = std::fmod(times[i], cycle);
    (phase >= threshold ? sp.val : sp.train).push_back(static_cast<Eigen::Index>(i));
  }
  if (sp.val.empty() || sp.train.empty()) {
    // record shorter than a cycle: fall back to a trailing block
    sp.train.clear();
    sp.val.clear();
    const auto n = static_cast<Eigen::Index>(times.size());
    const auto cut = n - std::max<Eigen::Index>(1, static_cast<Eigen::Index>(val_fraction * n));
    for (Eigen::Index i = 0; i < n; ++i) (i < cut ? sp.train : sp.val).push_back(i);
  }
  return sp;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

// Ridge least squares on standardized columns; returns coefficients in the
// original feature scale plus an intercept.
void standardized_ridge(const Eigen::MatrixXd& F, const Eigen::VectorXd& t, double lambda,
                        Eigen::VectorXd* coef, double* intercept) {
  const auto R = static_cast<double>(F.rows());
  const Eigen::RowVectorXd mean = F.colwise().mean();
  Eigen::RowVectorXd sd = ((F.rowwise() - mean).array().square().colwise().sum() / R).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (sd(j) < 1e-300) sd(j) = 1.0;
  }
  const double tmean = t.mean();
  const Eigen::MatrixXd Fs = (F.rowwise() - mean).array().rowwise() / sd.array();
  Eigen::MatrixXd G = Fs.transpose() * Fs;
  G.diagonal().array() += lambda * R;
  const Eigen::VectorXd rhs = Fs.transpose() * (t.array() - tmean).matrix();
  const Eigen::VectorXd c = G.ldlt().solve(rhs);
  *coef = c.array() / sd.transpose().array();
  *intercept = tmean - coef->dot(mean.transpose());
}

}  // namespace

MlpModel train_mlp(const Dataset& ds, int hidden, std::uint64_t seed, const TrainConfig& cfg) {
  if (ds.X.rows() == 0) throw std::invalid_argument("empty dataset");
  if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
  const auto d = ds.X.cols();

  const Split split = make_split(ds.sample_times, cfg.cycle_length, cfg.val_fraction);
  const Eigen::MatrixXd Xtr_raw = gather(ds.X, split.train);
  const Eigen::VectorXd ytr_raw = gather(ds.y_target, split.train);

  MlpModel model;
  model.spec = ds.spec;
  model.seed = seed;
  model.in_lo = Xtr_raw.colwise().minCoeff();
  model.in_hi = Xtr_raw.colwise().maxCoeff();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (model.in_hi(j) - model.in_lo(j) < 1e-300) model.in_hi(j) = model.in_lo(j) + 1.0;
  }
  model.out_lo = ytr_raw.minCoeff();
  model.out_hi = ytr_raw.maxCoeff();
  if (model.out_hi - model.out_lo < 1e-300) model.out_hi = model.out_lo + 1.0;

  auto normalize_X = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out = X;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double span = model.in_hi(j) - model.in_lo(j);
      out.col(j) = 2.0 * (X.col(j).array() - model.in_lo(j)) / span - 1.0;
    }
    return out;
  };
  const Eigen::MatrixXd Xtr = normalize_X(Xtr_raw);
  const Eigen::VectorXd ytr =
      2.0 * (ytr_raw.array() - model.out_lo) / (model.out_hi - model.out_lo) - 1.0;
  const Eigen::MatrixXd Xv = normalize_X(gather(ds.X, split.val));
  const Eigen::VectorXd yv =
      2.0 * (gather(ds.y_target, split.val).array() - model.out_lo) / (model.out_hi - model.out_lo) -
      1.0;
  const auto R = static_cast<double>(Xtr.rows());

  // ridge pre-fit supplies the warm-start direction for the first hidden row
  Eigen::VectorXd w_pre;
  double b_pre = 0.0;
  standardized_ridge(Xtr, ytr, cfg.ridge, &w_pre, &b_pre);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const double scale = cfg.init_scale / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd W1(hidden, d);
  for (Eigen::Index i = 0; i < hidden; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) W1(i, j) = scale * uniform(rng);
  }
  W1.row(0) = w_pre.transpose() / std::max(w_pre.norm(), 1e-300) * cfg.init_scale;
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(hidden);
  Eigen::RowVectorXd W2 = Eigen::RowVectorXd::Zero(hidden);
  double b2 = 0.0;

  auto resolve_output = [&](const Eigen::MatrixXd& H) {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    standardized_ridge(H, ytr, cfg.ridge, &coef, &intercept);
    W2 = coef.transpose();
    b2 = intercept;
  };
  auto hidden_of = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
    return (((X * W1.transpose()).rowwise() + b1.transpose()).array().tanh()).matrix();
  };
  auto val_mse = [&]() {
    if (Xv.rows() == 0) return 0.0;
    const Eigen::VectorXd p = hidden_of(Xv) * W2.transpose() + Eigen::VectorXd::Constant(Xv.rows(), b2);
    return (p - yv).squaredNorm() / static_cast<double>(Xv.rows());
  };

  Eigen::MatrixXd H = hidden_of(Xtr);
  resolve_output(H);

  struct Snapshot {
    double mse;
    Eigen::MatrixXd W1;
    Eigen::VectorXd b1;
    Eigen::RowVectorXd W2;
    double b2;
  } best{val_mse(), W1, b1, W2, b2};

  Eigen::MatrixXd mW1 = Eigen::MatrixXd::Zero(hidden, d), vW1 = mW1;
  Eigen::VectorXd mb1 = Eigen::VectorXd::Zero(hidden), vb1 = mb1;
  Eigen::RowVectorXd mW2 = Eigen::RowVectorXd::Zero(hidden), vW2 = mW2;
  double mb2 = 0.0, vb2 = 0.0;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  int bad = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    H = hidden_of(Xtr);
    const Eigen::VectorXd err =
        H * W2.transpose() + Eigen::VectorXd::Constant(Xtr.rows(), b2) - ytr;
    if (!err.allFinite()) throw std::runtime_error("training failed: loss diverged");

    const Eigen::RowVectorXd gW2 = 2.0 / R * (err.transpose() * H);
    const double gb2 = 2.0 / R * err.sum();
    const Eigen::MatrixXd dZ =
        (2.0 / R) * (err * W2).cwiseProduct((1.0 - H.array().square()).matrix());
    const Eigen::MatrixXd gW1 = dZ.transpose() * Xtr;
    const Eigen::VectorXd gb1 = dZ.colwise().sum().transpose();

    const double c1 = 1.0 - std::pow(beta1, epoch);
    const double c2 = 1.0 - std::pow(beta2, epoch);
    auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
      param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    adam(W1, mW1, vW1, gW1);
    adam(b1, mb1, vb1, gb1);
    adam(W2, mW2, vW2, gW2);
    mb2 = beta1 * mb2 + (1.0 - beta1) * gb2;
    vb2 = beta2 * vb2 + (1.0 - beta2) * gb2 * gb2;
    b2 -= cfg.learning_rate * (mb2 / c1) / (std::sqrt(vb2 / c2) + eps);

    H = hidden_of(Xtr);
    resolve_output(H);

    const double mse = val_mse();
    if (!std::isfinite(mse)) throw std::runtime_error("training failed: loss diverged");
    if (mse < best.mse * (1.0 - 1e-9)) {
      best = {mse, W1, b1, W2, b2};
      bad = 0;
    } else if (++bad >= cfg.patience) {
      break;
    }
  }

  model.W1 = best.W1;
  model.b1 = best.b1;
  model.W2 = best.W2;
  model.b2 = best.b2;
  return model;
}

Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.W1.cols()) throw std::invalid_argument("feature width mismatch");
  Eigen::MatrixXd Xn = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double span = model.in_hi(j) - model.in_lo(j);
    Xn.col(j) = 2.0 * (X.col(j).array() - model.in_lo(j)) / span - 1.0;
  }
  const Eigen::MatrixXd H =
      (((Xn * model.W1.transpose()).rowwise() + model.b1.transpose()).array().tanh()).matrix();
  const Eigen::VectorXd pn =
      H * model.W2.transpose() + Eigen::VectorXd::Constant(X.rows(), model.b2);
  return ((pn.array() + 1.0) / 2.0) * (model.out_hi - model.out_lo) + model.out_lo;
}

double predict(const MlpModel& model, const Eigen::VectorXd& features) {
  return predict(model, Eigen::MatrixXd(features.transpose()))(0);
}

int select_best(const std::map<int, double>& errors) {
  if (errors.empty()) throw std::invalid_argument("empty model pool");
  int best = errors.begin()->first;
  double best_err = errors.begin()->second;
  for (const auto& [N, err] : errors) {
    if (err < best_err) {  // strict: ties keep the smaller N (map is ordered)
      best = N;
      best_err = err;
    }
  }
  return best;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = j[static_cast<size_t>(i)][static_cast<size_t>(k)];
  }
  return M;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<size_t>(i)];
  return v;
}

}  // namespace

std::string MlpModel::to_json() const {
  json j;
  j["format"] = "invop-mlp-v1";
  j["hidden"] = hidden();
  j["input_width"] = W1.cols();
  j["W1"] = matrix_to_json(W1);
  j["b1"] = vector_to_json(b1);
  j["W2"] = vector_to_json(W2.transpose());
  j["b2"] = b2;
  j["in_lo"] = vector_to_json(in_lo);
  j["in_hi"] = vector_to_json(in_hi);
  j["out_lo"] = out_lo;
  j["out_hi"] = out_hi;
  j["seed"] = seed;
  j["feature_spec"] = {{"T", spec.T},
                       {"dt_tap", spec.dt_tap},
                       {"l", spec.l},
                       {"mode", invop::to_string(spec.mode)}};
  return j.dump(1);
}

void MlpModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << to_json() << "\n";
}

MlpModel MlpModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "invop-mlp-v1") throw std::runtime_error("unknown model format");
  MlpModel m;
  m.W1 = matrix_from_json(j.at("W1"));
  m.b1 = vector_from_json(j.at("b1"));
  m.W2 = vector_from_json(j.at("W2")).transpose();
  m.b2 = j.at("b2");
  m.in_lo = vector_from_json(j.at("in_lo"));
  m.in_hi = vector_from_json(j.at("in_hi"));
  m.out_lo = j.at("out_lo");
  m.out_hi = j.at("out_hi");
  m.seed = j.at("seed");
  const auto& fs = j.at("feature_spec");
  m.spec.T = fs.at("T");
  m.spec.dt_tap = fs.at("dt_tap");
  m.spec.l = fs.at("l");
  m.spec.mode = feature_mode_from_string(fs.at("mode"));
  return m;
}

MlpModel MlpModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace invop
