#include <cmath>

#include <doctest.h>

#include "invop/lti.hpp"
#include "test_support.hpp"

using namespace invop;
using test_support::random_min_phase_system;
using test_support::sorted_complex;

namespace {

// quadratic-root oracle for the zero polynomial 10 s^2 + 128 s + 185
struct ZeroOracle {
  double slow, fast;
  ZeroOracle() {
    const double disc = std::sqrt(128.0 * 128.0 - 4.0 * 10.0 * 185.0);
    slow = (-128.0 + disc) / 20.0;
    fast = (-128.0 - disc) / 20.0;
  }
};

}  // namespace

TEST_CASE("example system matches the physical parameters") {
  const StateSpace sys = build_example_system();
  CHECK(sys.n() == 4);
  // row 4 from substituting k2/m2 = 15, c2/m2 = 12
  CHECK(sys.A(3, 0) == doctest::Approx(15.0));
  CHECK(sys.A(3, 1) == doctest::Approx(12.0));
  CHECK(sys.A(3, 2) == doctest::Approx(-15.0));
  CHECK(sys.A(3, 3) == doctest::Approx(-12.0));
  CHECK(sys.B(3) == doctest::Approx(11.0));  // a/m2
  // direct matrix-product oracle
  CHECK(sys.C * sys.B == doctest::Approx(0.0));
  CHECK(sys.C * sys.A * sys.B == doctest::Approx(11.0));
}

TEST_CASE("relative degree") {
  CHECK(relative_degree(build_example_system()) == 2);

  for (int n = 1; n <= 5; ++n) {
    StateSpace chain;
    chain.A = Eigen::MatrixXd::Zero(n, n);
    if (n > 1) chain.A.topRightCorner(n - 1, n - 1).setIdentity();
    chain.B = Eigen::VectorXd::Unit(n, n - 1);
    chain.C = Eigen::RowVectorXd::Unit(n, 0);
    CHECK(relative_degree(chain) == n);
  }

  StateSpace direct;
  direct.A = Eigen::MatrixXd::Identity(3, 3) * -1.0;
  direct.B = Eigen::VectorXd::Zero(3);
  direct.B(0) = 11.0;
  direct.C = Eigen::RowVectorXd::Unit(3, 0);
  CHECK(relative_degree(direct) == 1);  // C B = 11

  StateSpace degenerate;  // output decoupled from the input entirely
  degenerate.A = Eigen::MatrixXd::Zero(2, 2);
  degenerate.B = Eigen::VectorXd::Unit(2, 0);
  degenerate.C = Eigen::RowVectorXd::Unit(2, 1);
  CHECK_THROWS_WITH_AS(relative_degree(degenerate), doctest::Contains("degenerate"),
                       std::runtime_error);
}

TEST_CASE("transfer function of the example system") {
  const StateSpace sys = build_example_system();
  const TransferFunction tf = transfer_function(sys);
  CHECK(tf.r == 2);
  REQUIRE(tf.num.size() == 3);
  REQUIRE(tf.den.size() == 5);
  CHECK(tf.b_lead() == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(tf.den(4) == doctest::Approx(1.0));

  const ZeroOracle oracle;
  const auto roots = sorted_complex(polynomial_roots(tf.num));
  CHECK(roots[0].real() == doctest::Approx(oracle.fast).epsilon(1e-10));
  CHECK(roots[1].real() == doctest::Approx(oracle.slow).epsilon(1e-10));
  CHECK(roots[0].imag() == doctest::Approx(0.0));
  CHECK(std::abs(oracle.slow - -1.6608) < 5e-5);   // the dominant zero
  CHECK(std::abs(oracle.fast - -11.1392) < 5e-5);
}

TEST_CASE("transfer function of decoupled first-order modes") {
  StateSpace sys;
  sys.A = -Eigen::MatrixXd::Identity(2, 2);
  sys.B.resize(2);
  sys.B << 1, 1;
  sys.C.resize(2);
  sys.C << 1, 0;
  const TransferFunction tf = transfer_function(sys);
  CHECK(tf.r == 1);
  // G(s) = 1/(s+1); the uncancelled realization carries num = s+1,
  // den = (s+1)^2
  REQUIRE(tf.num.size() == 2);
  CHECK(tf.num(0) == doctest::Approx(1.0));
  CHECK(tf.num(1) == doctest::Approx(1.0));
  CHECK(tf.den(0) == doctest::Approx(1.0));
  CHECK(tf.den(1) == doctest::Approx(2.0));
  CHECK(tf.den(2) == doctest::Approx(1.0));
  CHECK(tf.gain(0.0) == doctest::Approx(1.0));
}

TEST_CASE("hurwitz and minimum phase") {
  const StateSpace sys = build_example_system();
  CHECK(is_hurwitz(sys.A));
  CHECK_FALSE(is_hurwitz(Eigen::MatrixXd::Zero(3, 3)));

  const TransferFunction tf = transfer_function(sys);
  CHECK(is_minimum_phase(tf));

  TransferFunction rhp;
  rhp.num.resize(2);
  rhp.num << -1, 1;  // zero at +1
  rhp.den.resize(3);
  rhp.den << 1, 2, 1;
  rhp.r = 1;
  CHECK_FALSE(is_minimum_phase(rhp));

  TransferFunction no_zeros;
  no_zeros.num.resize(1);
  no_zeros.num << 1;
  no_zeros.den.resize(3);
  no_zeros.den << 1, 2, 1;
  no_zeros.r = 2;
  CHECK(is_minimum_phase(no_zeros));

  const NormalForm nf = normal_form(sys);
  CHECK(is_hurwitz(nf.A4));  // zeros at -1.66, -11.14 per the quadratic oracle
}

TEST_CASE("normal form of the example system") {
  const StateSpace sys = build_example_system();
  const NormalForm nf = normal_form(sys);
  CHECK(nf.r == 2);
  CHECK(nf.b_lead == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(nf.B1(0) == 0.0);
  CHECK(nf.B1(1) == doctest::Approx(11.0));
  CHECK(nf.A3(0) == 0.0);
  CHECK(nf.A3(1) == doctest::Approx(1.0 / 11.0));

  // A_xi and A_eta from the polynomial-division oracle:
  // den / zeros gives quotient s^2 - A_xi2 s - A_xi1 and remainder
  // -(A_eta1 + A_eta2 s) / b_lead (2x2 companion adjugate).
  const TransferFunction tf = transfer_function(sys);
  const Eigen::VectorXd z = tf.num / tf.num(2);  // monic zero polynomial
  const double q2 = 1.0;
  const double q1 = tf.den(3) - z(1) * q2;
  const double q0 = tf.den(2) - z(0) * q2 - z(1) * q1;
  const double rem1 = tf.den(1) - z(0) * q1 - z(1) * q0;
  const double rem0 = tf.den(0) - z(0) * q0;
  CHECK(nf.A_xi(0) == doctest::Approx(-q0).epsilon(1e-10));
  CHECK(nf.A_xi(1) == doctest::Approx(-q1).epsilon(1e-10));
  CHECK(nf.A_eta(0) == doctest::Approx(-rem0 * nf.b_lead).epsilon(1e-9));
  CHECK(nf.A_eta(1) == doctest::Approx(-rem1 * nf.b_lead).epsilon(1e-9));
  // Eq.-20-style identity: the ydot coefficient is -12 in normal-form
  // coordinates as well (pole sum minus zero sum)
  CHECK(nf.A_xi(1) == doctest::Approx(-12.0).epsilon(1e-10));
  CHECK(nf.A_xi(0) == doctest::Approx(57.0).epsilon(1e-10));

  // eig(A4) equals the numerator roots
  const auto eig = sorted_complex(polynomial_roots(tf.num));
  Eigen::EigenSolver<Eigen::MatrixXd> es(nf.A4);
  const auto a4eig = sorted_complex(es.eigenvalues());
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(eig[static_cast<size_t>(i)] - a4eig[static_cast<size_t>(i)]) <
          1e-8 * std::abs(eig[static_cast<size_t>(i)]));
  }

  // rows 1..r of S are C, CA
  CHECK((nf.S.row(0) - sys.C).norm() == doctest::Approx(0.0));
  CHECK((nf.S.row(1) - sys.C * sys.A).norm() < 1e-12);
}

TEST_CASE("normal form with full relative degree has no hidden block") {
  StateSpace sys;  // den = (s+1)^3 in companion form, y = x1
  sys.A.resize(3, 3);
  sys.A << 0, 1, 0, 0, 0, 1, -1, -3, -3;
  sys.B = Eigen::VectorXd::Unit(3, 2);
  sys.C = Eigen::RowVectorXd::Unit(3, 0);
  const NormalForm nf = normal_form(sys);
  CHECK(nf.r == 3);
  CHECK(nf.eta_dim() == 0);
  CHECK(nf.A2.cols() == 0);
  CHECK(nf.A_eta.size() == 0);
  CHECK(nf.A4.rows() == 0);
}

TEST_CASE("normal form round trip on random minimum-phase systems") {
  std::mt19937_64 rng(12345);
  const double dt = 0.005, duration = 6.0;
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);  // n in 2..6
    const int r = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    const StateSpace sys = random_min_phase_system(rng, n, r);
    const NormalForm nf = normal_form(sys);
    REQUIRE(nf.r == r);

    // assemble the block dynamics independently of S A S^-1
    const auto m = n - r;
    StateSpace block;
    block.A = Eigen::MatrixXd::Zero(n, n);
    block.A.topLeftCorner(r, r) = nf.A1;
    block.A.topRightCorner(r, m) = nf.A2;
    block.A.bottomLeftCorner(m, 1) = nf.A3;  // eta is driven by y = xi_1
    block.A.bottomRightCorner(m, m) = nf.A4;
    block.B = Eigen::VectorXd::Zero(n);
    block.B.head(r) = nf.B1;
    block.C = Eigen::RowVectorXd::Unit(n, 0);

    auto u = [](double t) { return std::sin(1.3 * t) + 0.5 * std::sin(0.4 * t + 1.0); };
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0(i) = 0.1 * std::sin(i + 1.0 + trial);

    const Trajectory orig = simulate(sys, u, x0, dt, duration);
    const Trajectory blk = simulate(block, u, nf.S * x0, dt, duration);

    const Eigen::MatrixXd transformed = orig.samples.leftCols(n) * nf.S.transpose();
    const double scale = std::max(1.0, transformed.cwiseAbs().maxCoeff());
    const double err = (transformed - blk.samples.leftCols(n)).cwiseAbs().maxCoeff();
    CHECK(err < 1e-6 * scale);

    // eig(A4) equals the numerator roots to 1e-8 relative
    const TransferFunction tf = transfer_function(sys);
    if (m > 0) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(nf.A4);
      const auto ze = sorted_complex(polynomial_roots(tf.num));
      const auto ae = sorted_complex(es.eigenvalues());
      for (size_t i = 0; i < ze.size(); ++i) {
        CHECK(std::abs(ze[i] - ae[i]) <= 1e-8 * std::max(1.0, std::abs(ze[i])));
      }
    }
  }
}

TEST_CASE("xi channels match numerically differentiated output") {
  const StateSpace sys = build_example_system();
  const NormalForm nf = normal_form(sys);
  const double dt = 0.01;
  auto u = [](double t) { return std::sin(2.0 * t); };
  const Trajectory traj = simulate(sys, u, Eigen::VectorXd::Zero(4), dt, 5.0);
  const Eigen::MatrixXd xi = traj.samples.leftCols(4) * nf.S.topRows(2).transpose();
  double worst = 0.0;
  for (Eigen::Index i = 1; i + 1 < traj.rows(); ++i) {
    const double dy = (xi(i + 1, 0) - xi(i - 1, 0)) / (2 * dt);
    worst = std::max(worst, std::abs(dy - xi(i, 1)));
  }
  CHECK(worst < 5e-4);  // O(dt^2) finite-difference error
}

TEST_CASE("simulate basics") {
  const StateSpace sys = build_example_system();

  SUBCASE("rest stays at rest") {
    const Trajectory traj =
        simulate(sys, [](double) { return 0.0; }, Eigen::VectorXd::Zero(4), 0.01, 1.0);
    CHECK(traj.col("y").cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("unit step settles at the DC gain") {
    const TransferFunction tf = transfer_function(sys);
    const Trajectory traj =
        simulate(sys, [](double) { return 1.0; }, Eigen::VectorXd::Zero(4), 0.01, 40.0);
    const double y_end = traj.samples(traj.rows() - 1, 4);
    CHECK(y_end == doctest::Approx(tf.gain(0.0)).epsilon(1e-7));
  }

  SUBCASE("fourth-order convergence under a smooth input") {
    auto u = [](double t) { return std::sin(2.0 * t) * std::exp(-0.3 * t); };
    Eigen::VectorXd x0(4);
    x0 << 0.1, 0, -0.05, 0.02;
    auto final_y = [&](double dt) {
      const Trajectory t = simulate(sys, u, x0, dt, 2.0);
      return t.samples(t.rows() - 1, 4);
    };
    const double ref = final_y(0.0025);
    const double e1 = std::abs(final_y(0.02) - ref);
    const double e2 = std::abs(final_y(0.01) - ref);
    CHECK(e1 / e2 > 8.0);   // ~16 for a 4th-order method
    CHECK(e1 / e2 < 40.0);
  }

  SUBCASE("divergence is reported") {
    StateSpace unstable;
    unstable.A = Eigen::MatrixXd::Identity(1, 1) * 2000.0;
    unstable.B = Eigen::VectorXd::Ones(1);
    unstable.C = Eigen::RowVectorXd::Ones(1);
    CHECK_THROWS_WITH_AS(
        simulate(unstable, [](double) { return 1.0; }, Eigen::VectorXd::Ones(1), 0.01, 50.0),
        doctest::Contains("diverged"), std::runtime_error);
  }
}

TEST_CASE("relative degree identification from a step response") {
  CHECK(identify_relative_degree_from_step(build_example_system()) == 2);

  StateSpace lag;  // first-order lag, r = 1
  lag.A = -2.0 * Eigen::MatrixXd::Identity(1, 1);
  lag.B = Eigen::VectorXd::Ones(1);
  lag.C = 3.0 * Eigen::RowVectorXd::Ones(1);
  CHECK(identify_relative_degree_from_step(lag) == 1);

  for (int n = 1; n <= 5; ++n) {  // integrator chains
    StateSpace chain;
    chain.A = Eigen::MatrixXd::Zero(n, n);
    if (n > 1) chain.A.topRightCorner(n - 1, n - 1).setIdentity();
    chain.B = Eigen::VectorXd::Unit(n, n - 1);
    chain.C = Eigen::RowVectorXd::Unit(n, 0);
    CHECK(identify_relative_degree_from_step(chain) == n);
  }

  // agreement with the Markov-parameter definition on random well-damped
  // systems with moderate pole magnitudes
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const int r = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    invop::StateSpace sys;
    {
      using namespace test_support;
      const Eigen::VectorXd den = poly_from_roots(random_stable_roots(rng, n, 1.5));
      const Eigen::VectorXd zeros = poly_from_roots(random_stable_roots(rng, n - r, 1.5));
      sys.A = Eigen::MatrixXd::Zero(n, n);
      if (n > 1) sys.A.topRightCorner(n - 1, n - 1).setIdentity();
      sys.A.row(n - 1) = -den.head(n).transpose();
      sys.B = Eigen::VectorXd::Unit(n, n - 1);
      sys.C = Eigen::RowVectorXd::Zero(n);
      sys.C.head(n - r + 1) = zeros.transpose();
    }
    CHECK(identify_relative_degree_from_step(sys, 0.005) == relative_degree(sys));
  }
}

TEST_CASE("trajectory CSV round trip") {
  Trajectory traj;
  traj.dt = 0.01;
  traj.t0 = 0.5;
  traj.channels = {"u", "y"};
  traj.samples.resize(3, 2);
  traj.samples << 1.0, -2.0, 0.1234567890123456, 3e-15, 7.0, 8.0;
  const Trajectory back = Trajectory::from_csv_text(traj.to_csv());
  CHECK(back.channels == traj.channels);
  CHECK(back.dt == doctest::Approx(traj.dt));
  CHECK(back.t0 == doctest::Approx(traj.t0));
  CHECK((back.samples - traj.samples).cwiseAbs().maxCoeff() == 0.0);  // 17 digits round-trip
  CHECK(traj.to_csv().find("\r") == std::string::npos);
}
