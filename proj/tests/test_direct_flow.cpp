#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qpo/direct_flow.hpp"

namespace {
constexpr double kPi = std::numbers::pi;

// K(m) by the arithmetic-geometric mean.
double elliptic_k(double m) {
  double a = 1.0, b = std::sqrt(1.0 - m);
  for (int i = 0; i < 40; ++i) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return kPi / (2.0 * a);
}

const qpo::AlphaParams& p3() {
  static const auto p = qpo::derive_params(3.0);
  return p;
}

qpo::ForcingLine two_freq_line(double th1, double th2) {
  qpo::TorusForcing f({1.0, std::sqrt(2.0)}, {{{1, 0}, 0.1, 0.0}, {{0, 1}, 0.0, 0.05}});
  return f.line(qpo::TorusPoint({th1, th2}));
}
}  // namespace

TEST(Energy, Values) {
  EXPECT_DOUBLE_EQ(qpo::energy(p3(), 0.0, -10.0), 50.0);
  EXPECT_NEAR(qpo::energy(p3(), p3().Lambda, 0.0), std::pow(p3().Lambda, 4) / 4, 1e-15);
}

TEST(DirectFlow, UnforcedFullPeriod) {
  qpo::ForcingLine zero;
  auto s = qpo::integrate(p3(), zero, {p3().Lambda, 0.0, 0.0}, 2 * kPi, 1e-12);
  EXPECT_NEAR(s.x, p3().Lambda, 1e-8);
  EXPECT_NEAR(s.v, 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(s.t, 2 * kPi);
}

TEST(DirectFlow, UnforcedEnergyConservedAndReversible) {
  qpo::ForcingLine zero;
  for (double a : {3.0, 4.5}) {
    const auto p = qpo::derive_params(a);
    const qpo::CartesianState s0{0.3, -2.0, 1.0};
    const double e0 = qpo::energy(p, s0);
    auto s1 = qpo::integrate(p, zero, s0, 6.0, 1e-12);
    EXPECT_NEAR(qpo::energy(p, s1), e0, 1e-9 * e0);
    auto back = qpo::integrate(p, zero, s1, 1.0, 1e-12);
    EXPECT_NEAR(back.x, s0.x, 1e-9);
    EXPECT_NEAR(back.v, s0.v, 1e-9);
  }
}

TEST(DirectFlow, ForcedEnergyGrowthBound) {
  const auto f = two_freq_line(0.2, 0.6);
  const qpo::CartesianState s0{0.0, -3.0, 0.0};
  const double sq0 = std::sqrt(qpo::energy(p3(), s0));
  qpo::CartesianState s = s0;
  double integral = 0.0;
  const double dt = 0.05;
  for (int i = 0; i < 200; ++i) {
    // Midpoint-free upper bound: sup|p| on the slice times its length.
    double sup = 0.0;
    for (int j = 0; j <= 10; ++j) sup = std::max(sup, std::abs(f.eval(s.t + dt * j / 10.0)));
    integral += (sup + 0.01) * dt;
    s = qpo::integrate(p3(), f, s, s.t + dt, 1e-12);
    EXPECT_LE(std::sqrt(qpo::energy(p3(), s)), sq0 + integral / std::sqrt(2.0) + 1e-9);
  }
}

TEST(PsiDirect, UnforcedClosedForm) {
  qpo::ForcingLine zero;
  const double v0 = -10.0;
  auto ev = qpo::psi_direct(p3(), zero, v0, 0.0);
  const double lambda = std::pow(4.0 * v0 * v0 / 2.0, 0.25);
  const double T1 = 4.0 * elliptic_k(0.5);
  EXPECT_NEAR(lambda, 3.76060, 1e-5);
  EXPECT_NEAR(ev.v1, v0, 1e-9);
  EXPECT_NEAR(ev.t1, T1 / lambda, 1e-10);
  EXPECT_NEAR(ev.t1, 1.97211, 1e-5);
}

TEST(PsiDirect, UnforcedIteratesAdvanceByPeriod) {
  qpo::ForcingLine zero;
  const double v0 = -7.0;
  const double T = p3().period(std::pow(2.0 * v0 * v0, 0.25));
  double t = 0.3, v = v0;
  for (int n = 1; n <= 5; ++n) {
    auto ev = qpo::psi_direct(p3(), zero, v, t);
    t = ev.t1;
    v = ev.v1;
    EXPECT_NEAR(t, 0.3 + n * T, 1e-9 * n);
    EXPECT_NEAR(v, v0, 1e-9);
  }
}

TEST(PsiDirect, ForcedEventIsAccurateZero) {
  for (double a : {3.0, 4.0, 5.0}) {
    const auto p = qpo::derive_params(a);
    const auto f = two_freq_line(0.1, 0.4);
    for (double v0 : {-20.0, -45.0}) {
      auto ev = qpo::psi_direct(p, f, v0, 0.7);
      EXPECT_LT(ev.v1, 0.0);
      EXPECT_GT(ev.t1, 0.7);
      // Re-integrate to the event and look at x there.
      auto s = qpo::integrate(p, f, {0.0, v0, 0.7}, ev.t1, 1e-13);
      EXPECT_LT(std::abs(s.x), 1e-9 * std::max(1.0, std::abs(ev.v1)));
      EXPECT_NEAR(s.v, ev.v1, 1e-8 * std::abs(ev.v1));
    }
  }
}

TEST(PsiDirect, RejectsNonNegativeVelocity) {
  qpo::ForcingLine zero;
  EXPECT_THROW(qpo::psi_direct(p3(), zero, 1.0, 0.0), qpo::DomainError);
  qpo::PsiDirectOptions o;
  o.v_star = -30.0;
  EXPECT_THROW(qpo::psi_direct(p3(), zero, -10.0, 0.0, o), qpo::DomainError);
}
