#include "invop/lti.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace invop {

void StateSpace::validate() const {
  const auto nn = A.rows();
  if (nn < 1 || A.cols() != nn) throw std::invalid_argument("A must be square");
  if (B.size() != nn) throw std::invalid_argument("B must be n x 1");
  if (C.size() != nn) throw std::invalid_argument("C must be 1 x n");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw std::invalid_argument("state-space entries must be finite");
  }
}

double TransferFunction::gain(double s) const {
  double nv = 0.0, dv = 0.0, p = 1.0;
  for (Eigen::Index i = 0; i < num.size(); ++i, p *= s) nv += num(i) * p;
  p = 1.0;
  for (Eigen::Index i = 0; i < den.size(); ++i, p *= s) dv += den(i) * p;
  return nv / dv;
}

int relative_degree(const StateSpace& sys, double tol) {
  sys.validate();
  const double normA = sys.A.norm() > 0 ? sys.A.jacobiSvd().singularValues()(0) : 0.0;
  const double normB = sys.B.norm();
  const double normC = sys.C.norm();
  Eigen::RowVectorXd row = sys.C;
  double powA = 1.0;
  for (int i = 1; i <= sys.n(); ++i) {
    const double markov = row * sys.B;
    if (std::abs(markov) > tol * normC * normB * powA) return i;
    row = row * sys.A;
    powA *= std::max(normA, 1.0);
  }
  throw std::runtime_error("degenerate system: no relative degree <= n");
}

Eigen::VectorXcd polynomial_roots(const Eigen::VectorXd& ascending) {
  Eigen::Index deg = ascending.size() - 1;
  if (deg < 0 || ascending(deg) == 0.0) {
    throw std::invalid_argument("leading polynomial coefficient must be nonzero");
  }
  if (deg == 0) return Eigen::VectorXcd();
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  companion.bottomLeftCorner(deg - 1, deg - 1).setIdentity();
  companion.col(deg - 1) = -ascending.head(deg) / ascending(deg);
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral failure");
  return es.eigenvalues();
}

TransferFunction transfer_function(const StateSpace& sys, double tol) {
  sys.validate();
  const auto nn = sys.n();
  const int r = relative_degree(sys, tol);

  // Faddeev-LeVerrier: (sI - A)^-1 = sum_k M_k s^(n-k) / charpoly(s).
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(nn, nn);
  Eigen::VectorXd den(nn + 1);
  den(nn) = 1.0;
  Eigen::VectorXd num_full = Eigen::VectorXd::Zero(nn);  // coeff of s^(n-k) at k-1
  Eigen::MatrixXd AM;
  double m_scale = 1.0;
  for (Eigen::Index k = 1; k <= nn; ++k) {
    num_full(k - 1) = sys.C * M * sys.B;
    AM = sys.A * M;
    const double ck = -AM.trace() / static_cast<double>(k);
    den(nn - k) = ck;
    M = AM + ck * Eigen::MatrixXd::Identity(nn, nn);
    m_scale = std::max(m_scale, M.norm());
  }
  // the recursion closes with M_{n+1} = 0
  if (!den.allFinite() || !num_full.allFinite() || M.norm() > 1e-6 * m_scale) {
    throw std::runtime_error("ill-conditioned realization");
  }

  TransferFunction tf;
  tf.r = r;
  tf.den = den;
  tf.num.resize(nn - r + 1);
  for (Eigen::Index j = 0; j <= nn - r; ++j) tf.num(j) = num_full(nn - 1 - j);
  // coefficients above degree n-r must vanish; they are Markov parameters
  // below the relative degree
  const double num_scale = std::max(1.0, tf.num.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k + 1 < r; ++k) {
    if (std::abs(num_full(k)) > 1e-6 * num_scale) {
      throw std::runtime_error("ill-conditioned realization");
    }
  }
  return tf;
}

bool is_hurwitz(const Eigen::MatrixXd& M, double tol) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix must be square");
  if (M.rows() == 0) return true;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral failure");
  return es.eigenvalues().real().maxCoeff() < -tol;
}

bool is_minimum_phase(const TransferFunction& tf, double tol) {
  const auto roots = polynomial_roots(tf.num);
  if (roots.size() == 0) return true;
  return roots.real().maxCoeff() < -tol;
}

NormalForm normal_form(const StateSpace& sys, double tol) {
  const auto nn = sys.n();
  const TransferFunction tf = transfer_function(sys, tol);
  const int r = tf.r;
  const auto m = nn - r;

  NormalForm nf;
  nf.r = r;
  nf.b_lead = tf.b_lead();

  // xi rows: C, CA, ..., CA^(r-1)
  Eigen::MatrixXd S(nn, nn);
  Eigen::RowVectorXd row = sys.C;
  for (int i = 0; i < r; ++i) {
    S.row(i) = row;
    row = row * sys.A;
  }

  if (m > 0) {
    // eta rows: leading controller-canonical coordinates. z = W x with
    // W = ctrb(Ac,Bc) ctrb(A,B)^-1.
    Eigen::MatrixXd ctrb(nn, nn);
    Eigen::VectorXd v = sys.B;
    for (Eigen::Index i = 0; i < nn; ++i) {
      ctrb.col(i) = v;
      v = sys.A * v;
    }
    Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(nn, nn);
    Ac.topRightCorner(nn - 1, nn - 1).setIdentity();
    Ac.row(nn - 1) = -tf.den.head(nn).transpose();
    Eigen::VectorXd Bc = Eigen::VectorXd::Unit(nn, nn - 1);
    Eigen::MatrixXd ctrb_c(nn, nn);
    v = Bc;
    for (Eigen::Index i = 0; i < nn; ++i) {
      ctrb_c.col(i) = v;
      v = Ac * v;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ctrb.transpose());
    if (!lu.isInvertible()) {
      throw std::runtime_error("transform construction failed: uncontrollable realization");
    }
    const Eigen::MatrixXd W = lu.solve(ctrb_c.transpose()).transpose();  // ctrb_c ctrb^-1
    S.bottomRows(m) = W.topRows(m);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> luS(S);
  if (!luS.isInvertible()) {
    throw std::runtime_error("transform construction failed: singular transform");
  }
  nf.S = S;

  const Eigen::MatrixXd Sinv = luS.inverse();
  const Eigen::MatrixXd At = S * sys.A * Sinv;
  const Eigen::VectorXd Bt = S * sys.B;
  const double scale = std::max(1.0, At.cwiseAbs().maxCoeff());

  // analytic blocks
  nf.A3 = Eigen::VectorXd::Zero(m);
  nf.A4 = Eigen::MatrixXd::Zero(m, m);
  if (m > 0) {
    nf.A3(m - 1) = 1.0 / nf.b_lead;
    nf.A4.topRightCorner(m - 1, m - 1).setIdentity();
    nf.A4.row(m - 1) = -tf.num.head(m).transpose() / nf.b_lead;
  }
  nf.B1 = Eigen::VectorXd::Zero(r);
  nf.B1(r - 1) = nf.b_lead;
  nf.A_xi = At.row(r - 1).head(r);
  nf.A_eta = At.row(r - 1).tail(m);
  nf.A1 = Eigen::MatrixXd::Zero(r, r);
  if (r > 1) nf.A1.topRightCorner(r - 1, r - 1).setIdentity();
  nf.A1.row(r - 1) = nf.A_xi;
  nf.A2 = Eigen::MatrixXd::Zero(r, m);
  nf.A2.row(r - 1) = nf.A_eta;

  // verify the transformed dynamics carry the block structure
  const double bscale = std::max(1.0, Bt.cwiseAbs().maxCoeff());
  auto near = [&](double a, double b, double s) { return std::abs(a - b) <= tol * 1e3 * s; };
  for (int i = 0; i + 1 < r; ++i) {
    for (Eigen::Index j = 0; j < nn; ++j) {
      if (!near(At(i, j), j == i + 1 ? 1.0 : 0.0, scale)) {
        throw std::runtime_error("normal form mismatch: xi shift structure");
      }
    }
    if (!near(Bt(i), 0.0, bscale)) throw std::runtime_error("normal form mismatch: B1 zeros");
  }
  if (!near(Bt(r - 1), nf.b_lead, bscale)) {
    throw std::runtime_error("normal form mismatch: B1 lead entry");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!near(Bt(r + i), 0.0, bscale)) throw std::runtime_error("normal form mismatch: eta input");
    if (!near(At(r + i, 0), nf.A3(i), scale)) {
      throw std::runtime_error("normal form mismatch: eta output coupling");
    }
    for (int j = 1; j < r; ++j) {
      if (!near(At(r + i, j), 0.0, scale)) {
        throw std::runtime_error("normal form mismatch: eta depends on xi derivatives");
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!near(At(r + i, r + j), nf.A4(i, j), scale)) {
        throw std::runtime_error("normal form mismatch: zero-dynamics block");
      }
    }
  }
  return nf;
}

Trajectory simulate(const StateSpace& sys, const std::function<double(double)>& u,
                    const Eigen::VectorXd& x0, double dt, double duration) {
  sys.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (duration < dt) throw std::invalid_argument("duration must cover at least one step");
  if (x0.size() != sys.n()) throw std::invalid_argument("x0 dimension mismatch");

  const auto steps = static_cast<Eigen::Index>(std::llround(duration / dt));
  const auto nn = sys.n();
  Trajectory traj;
  traj.dt = dt;
  traj.channels.reserve(static_cast<size_t>(nn) + 1);
  for (Eigen::Index i = 0; i < nn; ++i) traj.channels.push_back("x" + std::to_string(i + 1));
  traj.channels.push_back("y");
  traj.samples.resize(steps + 1, nn + 1);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd k1(nn), k2(nn), k3(nn), k4(nn);
  traj.samples.row(0).head(nn) = x.transpose();
  traj.samples(0, nn) = sys.C * x;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double u1 = u(t), u2 = u(t + 0.5 * dt), u3 = u(t + dt);
    k1 = sys.A * x + sys.B * u1;
    k2 = sys.A * (x + 0.5 * dt * k1) + sys.B * u2;
    k3 = sys.A * (x + 0.5 * dt * k2) + sys.B * u2;
    k4 = sys.A * (x + dt * k3) + sys.B * u3;
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw std::runtime_error("simulation diverged");
    traj.samples.row(k + 1).head(nn) = x.transpose();
    traj.samples(k + 1, nn) = sys.C * x;
  }
  return traj;
}

Trajectory simulate(const StateSpace& sys, const Trajectory& u, const Eigen::VectorXd& x0) {
  u.validate();
  auto uf = [&u](double t) { return interp_channel(u, 0, u.t0 + t); };
  Trajectory traj = simulate(sys, uf, x0, u.dt, u.duration());
  traj.t0 = u.t0;
  return traj;
}

namespace {

Eigen::VectorXd central_diff(const Eigen::VectorXd& v, double dt) {
  const auto m = v.size();
  Eigen::VectorXd d(m);
  for (Eigen::Index i = 1; i + 1 < m; ++i) d(i) = (v(i + 1) - v(i - 1)) / (2.0 * dt);
  d(0) = m > 2 ? d(1) : 0.0;
  d(m - 1) = m > 2 ? d(m - 2) : 0.0;
  return d;
}

}  // namespace

int identify_relative_degree_from_step(const StateSpace& sys, double dt, double jump_ratio) {
  sys.validate();
  const double pre = 1.0, post = 2.0;
  auto step = [&](double t) { return t >= pre ? 1.0 : 0.0; };
  const Trajectory traj = simulate(sys, step, Eigen::VectorXd::Zero(sys.n()), dt, pre + post);
  const auto m0 = static_cast<Eigen::Index>(std::llround(pre / dt));
  const auto last = traj.rows() - 1;

  Eigen::VectorXd d = traj.col("y");
  for (int order = 1; order <= sys.n(); ++order) {
    d = central_diff(d, dt);
    const Eigen::Index margin = order + 2;
    // repeated differencing smears the record edges; stay clear of them
    const Eigen::Index post_end = last - margin;
    if (m0 + margin >= post_end || m0 - margin <= margin) break;

    const double post_peak = d.segment(m0, post_end - m0 + 1).cwiseAbs().maxCoeff();
    // strictly causal pre-step samples: stencils never touch t >= 0
    const auto pre_end = m0 - margin;
    const auto pre_begin = static_cast<Eigen::Index>(margin);
    const auto seg = d.segment(pre_begin, pre_end - pre_begin + 1);
    const double pre_var = seg.maxCoeff() - seg.minCoeff();
    // a discontinuity lands inside the stencil width around the step; a
    // continuous derivative needs many samples to approach its peak
    const Eigen::Index detect = order + 1;
    const double smear_peak = d.segment(m0 - detect, 2 * detect + 1).cwiseAbs().maxCoeff();
    const double threshold = std::max(0.5 * post_peak, jump_ratio * pre_var);
    if (post_peak > 0.0 && smear_peak >= threshold) return order;
  }
  throw std::runtime_error("identification inconclusive");
}

StateSpace build_example_system() {
  const double m1 = 10.0, m2 = 5.0, k1 = 110.0, c1 = 68.0;
  const double a = k1 / 2.0, k2 = 75.0, c2 = 60.0;
  StateSpace sys;
  sys.A.resize(4, 4);
  sys.A << 0, 1, 0, 0,
      -(k1 + k2) / m1, -(c1 + c2) / m1, k2 / m1, c2 / m1,
      0, 0, 0, 1,
      k2 / m2, c2 / m2, -k2 / m2, -c2 / m2;
  sys.B.resize(4);
  sys.B << 0, 0, 0, a / m2;
  sys.C.resize(4);
  sys.C << 0, 0, 1, 0;
  return sys;
}

}  // namespace invop
