#include "invop/signals.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace invop {

ExcitationSpec ExcitationSpec::paper_default() {
  ExcitationSpec spec;
  spec.cycles = {{6, 0.75}, {3, 0.5},    {2, 0.5},    {0.5, 0.5}, {0.5, 0.3},
                 {0.3, 0.3}, {0.1, 0.3},  {0.5, -0.3}, {0.3, -0.3}, {0.1, -0.3},
                 {1, 0.25},  {0.5, 0.25}, {1, -0.1},   {0.5, -0.05}, {0.5, 0.1},
                 {0.5, -0.1}, {2, 0.25},  {1, 0.1},    {0.5, 0.05}, {1, 0.5}};
  return spec;
}

ExcitationSpec ExcitationSpec::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open excitation spec '" + path + "'");
  ExcitationSpec spec;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double fh = 0.0, al = 0.0;
    if (!(ls >> fh >> al)) throw std::runtime_error("bad excitation spec line: " + line);
    spec.cycles.emplace_back(fh, al);
  }
  if (spec.cycles.empty()) throw std::runtime_error("excitation spec holds no cycles");
  return spec;
}

namespace {

double s_piece(double t) {
  if (t >= 2 && t < 4) return 1.0;
  if (t >= 4 && t < 6) return -0.9;
  if (t >= 6 && t < 8) return 0.5;
  return 0.0;
}

double r_piece(double t) {
  if (t >= 0 && t < 1) return 0.4 * t;
  if (t >= 1 && t < 9) return 0.4;
  if (t >= 9 && t <= 10) return r_piece(10.0 - t);
  return 0.0;
}

}  // namespace

double excitation_cycle(double f_hz, double alpha, double t) {
  if (t < 0.0 || t > 10.0) throw std::domain_error("excitation cycle time out of [0, 10]");
  const double c = f_hz / 10.0;
  return alpha * (4.0 * std::sin(M_PI * c * t * t) + s_piece(t) + r_piece(t));
}

Trajectory excitation_signal(const ExcitationSpec& spec, double dt) {
  if (spec.cycles.empty()) throw std::invalid_argument("excitation spec holds no cycles");
  const double per = spec.cycle_duration;
  const double cells = per / dt;
  if (std::abs(cells - std::round(cells)) > 1e-9 * cells) {
    throw std::invalid_argument("dt must divide the cycle duration");
  }
  const auto per_cycle = static_cast<Eigen::Index>(std::llround(cells));
  const auto ncyc = static_cast<Eigen::Index>(spec.cycles.size());
  const auto samples = per_cycle * ncyc + 1;
  Eigen::VectorXd u(samples);
  for (Eigen::Index i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) * dt;
    auto c = static_cast<Eigen::Index>(t / per);
    if (c >= ncyc) c = ncyc - 1;
    const double local = t - static_cast<double>(c) * per;
    u(i) = excitation_cycle(spec.cycles[static_cast<size_t>(c)].first,
                            spec.cycles[static_cast<size_t>(c)].second, local);
  }
  return make_trajectory(dt, 0.0, "u", u);
}

double nominal_trajectory(int k, double t) {
  if (t < 0.0 || t > 10.0) throw std::domain_error("nominal trajectory time out of [0, 10]");
  switch (k) {
    case 1:  // trapezoid
      if (t >= 1 && t < 3) return 0.4 * (t - 1);
      if (t >= 3 && t < 6) return 0.8;
      if (t >= 6 && t < 8) return 0.4 * (8 - t);
      return 0.0;
    case 2:  // triangle wave
      if (t >= 2 && t < 3) return t - 2;
      if (t >= 3 && t < 5) return 3.7 - 0.9 * t;
      if (t >= 5 && t < 7) return t - 5.8;
      if (t >= 7 && t < 8) return 1.2 * (8 - t);
      return 0.0;
    case 3:  // square wave
      if (t >= 2 && t < 4) return 1.0;
      if (t >= 4 && t < 6) return -1.0;
      if (t >= 6 && t < 8) return 1.0;
      return 0.0;
    case 4:  // serrated mixture
      if (t >= 1 && t < 2.5) return 2.0 * (t - 1) / 3.0;
      if (t >= 2.5 && t < 4) return 2.0 * (4 - t) / 3.0;
      if (t >= 4 && t < 5) return 8.0 * (t - 4) / 15.0;
      if (t >= 5 && t < 6) return 8.0 * (6 - t) / 15.0;
      if (t >= 6 && t < 7.5) return 0.4 * (t - 6);
      if (t >= 7.5 && t < 9) return 0.4 * (9 - t);
      return 0.0;
    case 5:  // monotonic
      return 0.001 * (std::pow(t, 3.2) - t * t);
    case 6:
      return std::sin(0.4 * M_PI * t) - 0.9 * std::sin(0.6 * M_PI * t) + 0.2 * std::sin(M_PI * t);
    case 7:
      return 1.5 * std::sin(0.7 * M_PI * t) - 0.5 * std::sin(0.4 * M_PI * t);
    case 8:
      return -0.5 * std::sin(0.3 * M_PI * t) - 0.6 * std::sin(0.7 * M_PI * t) +
             0.2 * std::sin(1.2 * M_PI * t);
    case 9:
      return 0.7 * std::sin(0.26 * M_PI * t) + 0.3 * std::sin(1.3 * M_PI * t) -
             0.2 * std::sin(1.4 * M_PI * t);
    case 10:  // slow chirp
      return 0.35 * std::sin(std::pow(t, 1.5));
    default:
      throw std::domain_error("nominal trajectory index must be in 1..10");
  }
}

FilteredTrajectory filter_chain(const Trajectory& y0, double a) {
  y0.validate();
  if (!(a > 0.0)) throw std::invalid_argument("cutoff a must be positive");
  const auto m = y0.rows();
  const double dt = y0.dt;
  const Eigen::VectorXd in = y0.samples.col(0);

  // cascade states s = (y1, y2, y3, y_d); all stages start at y0(0) so a
  // constant prefix produces no startup transient
  Eigen::Vector4d s = Eigen::Vector4d::Constant(in(0));
  Eigen::MatrixXd stages(m, 4);
  auto deriv = [&](const Eigen::Vector4d& x, double u) {
    Eigen::Vector4d d;
    d(0) = a * (u - x(0));
    d(1) = a * (x(0) - x(1));
    d(2) = a * (x(1) - x(2));
    d(3) = a * (x(2) - x(3));
    return d;
  };
  stages.row(0) = s.transpose();
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    const double u1 = in(k), u3 = in(k + 1), u2 = 0.5 * (u1 + u3);
    const Eigen::Vector4d k1 = deriv(s, u1);
    const Eigen::Vector4d k2 = deriv(s + 0.5 * dt * k1, u2);
    const Eigen::Vector4d k3 = deriv(s + 0.5 * dt * k2, u2);
    const Eigen::Vector4d k4 = deriv(s + dt * k3, u3);
    s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    stages.row(k + 1) = s.transpose();
  }

  const double a2 = a * a, a3 = a2 * a, a4 = a3 * a;
  Eigen::Matrix<double, 5, 5> D;
  // rows act on [y_d, y3, y2, y1, y0]
  D << 1, 0, 0, 0, 0,
      -a, a, 0, 0, 0,
      a2, -2 * a2, a2, 0, 0,
      -a3, 3 * a3, -3 * a3, a3, 0,
      a4, -4 * a4, 6 * a4, -4 * a4, a4;

  Eigen::MatrixXd stack(m, 5);
  stack.col(0) = stages.col(3);  // y_d
  stack.col(1) = stages.col(2);  // y3
  stack.col(2) = stages.col(1);  // y2
  stack.col(3) = stages.col(0);  // y1
  stack.col(4) = in;             // y0

  FilteredTrajectory out;
  out.cutoff_a = a;
  out.derivatives.dt = dt;
  out.derivatives.t0 = y0.t0;
  out.derivatives.channels = {"y_d", "y_d1", "y_d2", "y_d3", "y_d4"};
  out.derivatives.samples = stack * D.transpose();
  out.stages.dt = dt;
  out.stages.t0 = y0.t0;
  out.stages.channels = {"y1", "y2", "y3", "y0"};
  out.stages.samples.resize(m, 4);
  out.stages.samples.col(0) = stages.col(0);
  out.stages.samples.col(1) = stages.col(1);
  out.stages.samples.col(2) = stages.col(2);
  out.stages.samples.col(3) = in;
  return out;
}

Trajectory add_awgn(const Trajectory& y, double snr, std::uint64_t seed, bool snr_is_db) {
  y.validate();
  if (std::isinf(snr)) return y;
  const double ratio = snr_is_db ? std::pow(10.0, snr / 10.0) : snr;
  if (!(ratio > 0.0)) throw std::invalid_argument("SNR must be positive");

  Trajectory out = y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double power = y.samples.col(j).squaredNorm() / static_cast<double>(y.rows());
    if (power <= 0.0) throw std::runtime_error("SNR undefined: zero-power channel");
    const double sigma = std::sqrt(power / ratio);
    for (Eigen::Index i = 0; i < y.rows(); ++i) out.samples(i, j) += sigma * gauss(rng);
  }
  return out;
}

StencilDerivatives finite_difference_34(const Trajectory& yddot) {
  yddot.validate();
  const auto m = yddot.rows();
  if (m < 5) throw std::domain_error("stencil needs at least 5 samples");
  const double dt = yddot.dt;
  const Eigen::VectorXd v = yddot.samples.col(0);

  Eigen::VectorXd d3 = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd d4 = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 2; i + 2 < m; ++i) {
    d3(i) = (-v(i + 2) + 8 * v(i + 1) - 8 * v(i - 1) + v(i - 2)) / (12.0 * dt);
    d4(i) = (-v(i + 2) + 16 * v(i + 1) - 30 * v(i) + 16 * v(i - 1) - v(i - 2)) / (12.0 * dt * dt);
  }
  StencilDerivatives out;
  out.y3 = make_trajectory(dt, yddot.t0, "y3", d3);
  out.y4 = make_trajectory(dt, yddot.t0, "y4", d4);
  out.margin = 2;
  return out;
}

std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace invop
