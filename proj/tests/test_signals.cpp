#include <cmath>
#include <fstream>
#include <random>

#include <doctest.h>

#include "invop/signals.hpp"

using namespace invop;

TEST_CASE("excitation cycle values") {
  CHECK(excitation_cycle(6.0, 0.75, 0.0) == 0.0);
  // hand evaluation: sin(2.5 pi) = 1, s(5) = -0.9, r(5) = 0.4
  CHECK(excitation_cycle(1.0, 1.0, 5.0) == doctest::Approx(3.5).epsilon(1e-12));
  // reflection rule r(9.5) = r(0.5) = 0.2
  const double at95 = excitation_cycle(1.0, 1.0, 9.5);
  const double chirp = 4.0 * std::sin(M_PI * 0.1 * 9.5 * 9.5);
  CHECK(at95 - chirp == doctest::Approx(0.2).epsilon(1e-12));  // s(9.5) = 0
  CHECK_THROWS_AS(excitation_cycle(1.0, 1.0, 10.5), std::domain_error);
  CHECK_THROWS_AS(excitation_cycle(1.0, 1.0, -0.1), std::domain_error);
}

TEST_CASE("excitation signal layout") {
  const ExcitationSpec spec = ExcitationSpec::paper_default();
  REQUIRE(spec.cycles.size() == 20);
  CHECK(spec.cycles[0].first == 6.0);
  CHECK(spec.cycles[0].second == 0.75);
  CHECK(spec.cycles[12].first == 1.0);
  CHECK(spec.cycles[12].second == -0.1);

  const Trajectory u = excitation_signal(spec, 0.01);
  CHECK(u.rows() == 20001);  // 200 s at 100 Hz
  CHECK(u.duration() == doctest::Approx(200.0));
  // cycle 1 content at t = 5 equals alpha_1 * cycle(6, 1, 5)
  CHECK(u.samples(500, 0) == doctest::Approx(excitation_cycle(6.0, 0.75, 5.0)));
  // amplitude scales linearly in alpha for fixed f: cycles 4 (0.5, 0.5)
  // and 19 (0.5, 0.05)
  double max4 = 0.0, max19 = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    max4 = std::max(max4, std::abs(u.samples(3000 + i, 0)));
    max19 = std::max(max19, std::abs(u.samples(18000 + i, 0)));
  }
  CHECK(max4 / max19 == doctest::Approx(10.0).epsilon(1e-9));
  CHECK_THROWS_AS(excitation_signal(spec, 0.013), std::invalid_argument);
}

TEST_CASE("nominal trajectories") {
  CHECK(nominal_trajectory(1, 4.0) == doctest::Approx(0.8));
  CHECK(nominal_trajectory(3, 5.0) == doctest::Approx(-1.0));
  CHECK(nominal_trajectory(5, 0.0) == 0.0);
  CHECK(nominal_trajectory(2, 2.5) == doctest::Approx(0.5));
  CHECK(nominal_trajectory(10, 0.0) == 0.0);
  for (int k = 1; k <= 10; ++k) {
    CHECK(std::abs(nominal_trajectory(k, 0.0)) < 1e-12);  // all start from rest
    double peak = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.01) {
      peak = std::max(peak, std::abs(nominal_trajectory(k, t)));
    }
    CHECK(peak > 0.0);
    CHECK(peak < 10.0);  // bounded, as the hidden-state bound requires
  }
  CHECK_THROWS_AS(nominal_trajectory(0, 1.0), std::domain_error);
  CHECK_THROWS_AS(nominal_trajectory(11, 1.0), std::domain_error);
  CHECK_THROWS_AS(nominal_trajectory(1, -1.0), std::domain_error);
}

TEST_CASE("filter chain") {
  const double a = 2.0 * M_PI;

  SUBCASE("constant input passes with unit DC gain and zero derivatives") {
    const Trajectory y0 = make_trajectory(0.01, 0.0, "y0", Eigen::VectorXd::Constant(600, 0.7));
    const FilteredTrajectory ft = filter_chain(y0, a);
    // stages start at y0(0): no transient at all
    CHECK((ft.derivatives.samples.col(0).array() - 0.7).abs().maxCoeff() < 1e-12);
    for (int d = 1; d <= 4; ++d) {
      CHECK(ft.derivatives.samples.col(d).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  SUBCASE("row-2 identity equals the stage-4 dynamics exactly") {
    Eigen::VectorXd ramp(1001);
    for (int i = 0; i <= 1000; ++i) ramp(i) = nominal_trajectory(6, i * 0.01);
    const FilteredTrajectory ft = filter_chain(make_trajectory(0.01, 0.0, "y0", ramp), a);
    const Eigen::VectorXd lhs = ft.derivatives.samples.col(1);
    const Eigen::VectorXd rhs =
        -a * ft.derivatives.samples.col(0) + a * ft.stages.samples.col(2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);  // same arithmetic by construction
  }

  SUBCASE("derivative channels are consistent under numerical differentiation") {
    for (double dt : {0.01, 0.005}) {
      const auto m = static_cast<Eigen::Index>(std::llround(10.0 / dt)) + 1;
      Eigen::VectorXd y0(m);
      for (Eigen::Index i = 0; i < m; ++i) y0(i) = nominal_trajectory(7, i * dt);
      const FilteredTrajectory ft = filter_chain(make_trajectory(dt, 0.0, "y0", y0), a);
      for (int d = 0; d <= 3; ++d) {
        const Eigen::VectorXd f = ft.derivatives.samples.col(d);
        const Eigen::VectorXd g = ft.derivatives.samples.col(d + 1);
        double worst = 0.0;
        for (Eigen::Index i = 1; i + 1 < m; ++i) {
          worst = std::max(worst, std::abs((f(i + 1) - f(i - 1)) / (2 * dt) - g(i)));
        }
        const double scale = g.cwiseAbs().maxCoeff();
        // second-order central differences: error ~ dt^2 * ||f'''||
        CHECK(worst < 50.0 * dt * dt * std::max(scale, 1.0) * a);
      }
    }
  }
}

TEST_CASE("additive white gaussian noise") {
  Eigen::VectorXd sig(20000);
  for (int i = 0; i < 20000; ++i) sig(i) = std::sin(0.013 * i) + 0.3 * std::sin(0.041 * i);
  const Trajectory y = make_trajectory(0.01, 0.0, "y", sig);

  SUBCASE("infinite SNR is the identity") {
    const Trajectory out = add_awgn(y, std::numeric_limits<double>::infinity(), 7);
    CHECK((out.samples - y.samples).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("sample SNR lands within half a dB of the request") {
    const Trajectory out = add_awgn(y, 20.0, 99);
    const double ps = sig.squaredNorm();
    const double pn = (out.samples.col(0) - sig).squaredNorm();
    const double snr_db = 10.0 * std::log10(ps / pn);
    CHECK(std::abs(snr_db - 20.0) < 0.5);
  }

  SUBCASE("deterministic in the seed, independent across channels") {
    Trajectory two;
    two.dt = 0.01;
    two.channels = {"a", "b"};
    two.samples.resize(20000, 2);
    two.samples.col(0) = sig;
    two.samples.col(1) = sig;
    const Trajectory n1 = add_awgn(two, 20.0, 5);
    const Trajectory n2 = add_awgn(two, 20.0, 5);
    CHECK((n1.samples - n2.samples).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
    const Trajectory n3 = add_awgn(two, 20.0, 6);
    CHECK((n1.samples - n3.samples).cwiseAbs().maxCoeff() > 0.0);
    // channels draw independent noise
    const Eigen::VectorXd da = n1.samples.col(0) - sig;
    const Eigen::VectorXd db = n1.samples.col(1) - sig;
    const double corr = da.dot(db) / (da.norm() * db.norm());
    CHECK(std::abs(corr) < 0.05);
  }

  SUBCASE("linear-ratio interpretation is supported") {
    const Trajectory out = add_awgn(y, 100.0, 99, /*snr_is_db=*/false);
    const double snr_db =
        10.0 * std::log10(sig.squaredNorm() / (out.samples.col(0) - sig).squaredNorm());
    CHECK(std::abs(snr_db - 20.0) < 0.5);  // ratio 100 == 20 dB
  }

  SUBCASE("zero-power channel is rejected") {
    const Trajectory zero = make_trajectory(0.01, 0.0, "y", Eigen::VectorXd::Zero(100));
    CHECK_THROWS_WITH_AS(add_awgn(zero, 20.0, 1), doctest::Contains("SNR undefined"),
                         std::runtime_error);
  }
}

TEST_CASE("five-point stencil derivatives") {
  const double dt = 0.05;

  SUBCASE("exact on polynomials") {
    // the first-derivative stencil is exact through degree 4, the
    // second-derivative stencil through degree 5
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    const int m = 41;
    for (int trial = 0; trial < 25; ++trial) {
      double c[6];
      for (double& x : c) x = coef(rng);
      Eigen::VectorXd deg4(m), d1(m), deg5(m), d2(m);
      for (int i = 0; i < m; ++i) {
        const double t = i * dt;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        deg4(i) = c[0] + c[1] * t + c[2] * t2 + c[3] * t3 + c[4] * t4;
        d1(i) = c[1] + 2 * c[2] * t + 3 * c[3] * t2 + 4 * c[4] * t3;
        deg5(i) = deg4(i) + c[5] * t5;
        d2(i) = 2 * c[2] + 6 * c[3] * t + 12 * c[4] * t2 + 20 * c[5] * t3;
      }
      const auto s3 = finite_difference_34(make_trajectory(dt, 0.0, "ydd", deg4));
      const auto s4 = finite_difference_34(make_trajectory(dt, 0.0, "ydd", deg5));
      for (Eigen::Index i = 2; i + 2 < m; ++i) {
        CHECK(s3.y3.samples(i, 0) == doctest::Approx(d1(i)).epsilon(1e-10));
        CHECK(s4.y4.samples(i, 0) == doctest::Approx(d2(i)).epsilon(1e-9));
      }
    }
  }

  SUBCASE("constant second derivative maps to zero") {
    const auto s = finite_difference_34(make_trajectory(dt, 0.0, "ydd",
                                                        Eigen::VectorXd::Constant(20, 3.3)));
    CHECK(s.y3.samples.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.y4.samples.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.margin == 2);
  }

  SUBCASE("short records are rejected") {
    CHECK_THROWS_AS(finite_difference_34(make_trajectory(dt, 0.0, "ydd",
                                                         Eigen::VectorXd::Ones(4))),
                    std::domain_error);
  }
}

TEST_CASE("excitation spec file loading") {
  const std::string path = "/tmp/invop_test_excitation.txt";
  {
    std::ofstream f(path);
    f << "# f alpha\n6 0.75\n3 0.5\n";
  }
  const ExcitationSpec spec = ExcitationSpec::from_file(path);
  REQUIRE(spec.cycles.size() == 2);
  CHECK(spec.cycles[1].first == 3.0);
  CHECK(spec.cycles[1].second == 0.5);
  CHECK_THROWS_AS(ExcitationSpec::from_file("/nonexistent/file"), std::runtime_error);
}
