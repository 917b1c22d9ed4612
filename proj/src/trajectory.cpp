#include "invop/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace invop {

bool Trajectory::has(const std::string& name) const {
  return std::find(channels.begin(), channels.end(), name) != channels.end();
}

Eigen::Index Trajectory::channel_index(const std::string& name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) {
    throw std::invalid_argument("trajectory has no channel '" + name + "'");
  }
  return static_cast<Eigen::Index>(it - channels.begin());
}

Eigen::VectorXd Trajectory::col(const std::string& name) const {
  return samples.col(channel_index(name));
}

void Trajectory::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("trajectory dt must be positive and finite");
  }
  if (rows() < 1) {
    throw std::invalid_argument("trajectory must hold at least one sample");
  }
  if (static_cast<Eigen::Index>(channels.size()) != cols()) {
    throw std::invalid_argument("channel names do not match sample columns");
  }
  if (!samples.allFinite()) {
    throw std::invalid_argument("trajectory contains non-finite values");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Trajectory::to_csv() const {
  std::string out = "t";
  for (const auto& c : channels) {
    out += ",";
    out += c;
  }
  out += "\n";
  for (Eigen::Index i = 0; i < rows(); ++i) {
    out += format_double(time(i));
    for (Eigen::Index j = 0; j < cols(); ++j) {
      out += ",";
      out += format_double(samples(i, j));
    }
    out += "\n";
  }
  return out;
}

void Trajectory::save_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << to_csv();
}

Trajectory Trajectory::from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  // header (skip comment lines)
  do {
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  } while (!line.empty() && line[0] == '#');

  Trajectory traj;
  {
    std::istringstream hs(line);
    std::string tok;
    bool first = true;
    while (std::getline(hs, tok, ',')) {
      if (first) {
        if (tok != "t") throw std::runtime_error("CSV header must start with 't'");
        first = false;
      } else {
        traj.channels.push_back(tok);
      }
    }
  }
  const auto nc = static_cast<Eigen::Index>(traj.channels.size());
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    Eigen::Index j = -1;
    while (std::getline(ls, tok, ',')) {
      const double v = std::stod(tok);
      if (j < 0) {
        times.push_back(v);
      } else {
        values.push_back(v);
      }
      ++j;
    }
    if (j != nc) throw std::runtime_error("CSV row width mismatch");
  }
  if (times.empty()) throw std::runtime_error("CSV holds no samples");
  traj.t0 = times.front();
  traj.dt = times.size() > 1 ? times[1] - times[0] : 1.0;
  traj.samples.resize(static_cast<Eigen::Index>(times.size()), nc);
  for (Eigen::Index i = 0; i < traj.samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < nc; ++j) {
      traj.samples(i, j) = values[static_cast<size_t>(i * nc + j)];
    }
  }
  return traj;
}

Trajectory Trajectory::load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_csv_text(ss.str());
}

Trajectory make_trajectory(double dt, double t0, const std::string& channel,
                           const Eigen::VectorXd& values) {
  Trajectory traj;
  traj.dt = dt;
  traj.t0 = t0;
  traj.channels = {channel};
  traj.samples = values;
  return traj;
}

double interp_channel(const Trajectory& traj, Eigen::Index column, double t) {
  const double s = (t - traj.t0) / traj.dt;
  if (s <= 0.0) return traj.samples(0, column);
  const auto last = traj.rows() - 1;
  if (s >= static_cast<double>(last)) return traj.samples(last, column);
  const auto i = static_cast<Eigen::Index>(std::floor(s));
  const double frac = s - static_cast<double>(i);
  return traj.samples(i, column) * (1.0 - frac) + traj.samples(i + 1, column) * frac;
}

}  // namespace invop
