#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpo/dop853.hpp"

using qpo::ode::Options;
using qpo::ode::State;

TEST(Dop853, HarmonicOscillatorFullTurn) {
  auto rhs = [](double, const State<2>& y, State<2>& dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  Options opt;
  opt.rtol = opt.atol = 1e-12;
  auto y = qpo::ode::integrate<2>(rhs, 0.0, State<2>{1.0, 0.0}, 2 * std::numbers::pi, opt);
  EXPECT_NEAR(y[0], 1.0, 1e-10);
  EXPECT_NEAR(y[1], 0.0, 1e-10);
}

TEST(Dop853, BackwardIntegrationInvertsForward) {
  auto rhs = [](double t, const State<1>& y, State<1>& dy) { dy[0] = std::cos(t) * y[0]; };
  Options opt;
  opt.rtol = opt.atol = 1e-12;
  auto y1 = qpo::ode::integrate<1>(rhs, 0.0, State<1>{2.0}, 3.0, opt);
  EXPECT_NEAR(y1[0], 2.0 * std::exp(std::sin(3.0)), 1e-10);
  auto y0 = qpo::ode::integrate<1>(rhs, 3.0, y1, 0.0, opt);
  EXPECT_NEAR(y0[0], 2.0, 1e-10);
}

TEST(Dop853, DenseOutputMatchesExactSolution) {
  auto rhs = [](double, const State<2>& y, State<2>& dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  Options opt;
  opt.rtol = opt.atol = 1e-10;
  qpo::ode::Dop853<2, decltype(rhs)> s(rhs);
  double worst = 0.0;
  s.integrate(0.0, {1.0, 0.0}, 10.0, opt, [&](auto& st) {
    for (int i = 1; i < 8; ++i) {
      const double t = st.t_old() + (st.t_new() - st.t_old()) * i / 8.0;
      worst = std::max(worst, std::abs(st.dense(t)[0] - std::cos(t)));
    }
    return true;
  });
  EXPECT_LT(worst, 1e-8);
}

TEST(Dop853, ObserverCanStop) {
  auto rhs = [](double, const State<1>& y, State<1>& dy) { dy[0] = 1.0 + 0.0 * y[0]; };
  Options opt;
  qpo::ode::Dop853<1, decltype(rhs)> s(rhs);
  auto r = s.integrate(0.0, {0.0}, 100.0, opt, [](auto& st) { return st.t_new() < 1.0; });
  EXPECT_TRUE(r.stopped);
  EXPECT_NEAR(r.y[0], r.t, 1e-12);
}

TEST(Dop853, NonFiniteFieldReportsNumericError) {
  auto rhs = [](double t, const State<1>& y, State<1>& dy) { dy[0] = y[0] * y[0] + 0.0 * t; };
  Options opt;
  // Blows up at t = 1.
  EXPECT_THROW(qpo::ode::integrate<1>(rhs, 0.0, State<1>{1.0}, 2.0, opt), qpo::NumericError);
}
