#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "qpo/thresholds.hpp"

namespace {
const qpo::Oscillator& osc(double a) {
  static std::map<double, qpo::Oscillator> cache;
  auto it = cache.find(a);
  if (it == cache.end()) it = cache.emplace(a, qpo::Oscillator::make(a)).first;
  return it->second;
}

qpo::TorusForcing default_forcing() {
  return qpo::TorusForcing({1.0, std::sqrt(2.0)}, {{{1, 0}, 0.1, 0.0}, {{0, 1}, 0.0, 0.05}});
}
}  // namespace

TEST(Thresholds, UnforcedReducesToEnergyFloor) {
  const auto& o = osc(3.0);
  const auto T = qpo::compute_thresholds(o, qpo::TorusForcing({1.0}, {}));
  const double floor = std::pow(2.0 * o.p.kappa1, 3.0);
  EXPECT_NEAR(floor, 5.216, 1e-3);
  EXPECT_EQ(T.calI_top, std::max(4.0 * T.calI_star2, floor));
  EXPECT_NEAR(T.v_star, -2.0 * std::sqrt(T.calI_top), 1e-14);
  // Only round-off survives in the remainder suprema.
  EXPECT_LT(T.C0, 1e-4);
  EXPECT_LT(T.C0_tilde, 1e-4);
  EXPECT_NEAR(T.alpha0, o.p.kappa0, 1e-12);
  EXPECT_NEAR(T.beta0, o.p.kappa0, 1e-12);
}

TEST(Thresholds, OrderedAndNegativeVelocity) {
  for (double a : {3.0, 4.0, 5.0}) {
    const auto T = qpo::compute_thresholds(osc(a), default_forcing());
    EXPECT_GT(T.r_star, 0.0);
    EXPECT_LE(T.I_star, T.I_C0);
    EXPECT_LT(T.I_C0, T.I_star2);
    EXPECT_LT(T.calI_star, T.calI_star2);
    EXPECT_LT(T.calI_star2, T.calI_top);
    EXPECT_LT(T.v_star, 0.0);
    EXPECT_GT(T.C0, 0.0);
    EXPECT_GT(T.C0_tilde, 0.0);
    EXPECT_LT(T.alpha0, osc(a).p.kappa0);
    EXPECT_GT(T.beta0, osc(a).p.kappa0);
    EXPECT_GT(T.alpha0, 0.0);
  }
}

TEST(Thresholds, MonotoneInForcingAmplitude) {
  const auto base = default_forcing();
  double prev_v = 0.0, prev_I = 0.0;
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    const auto T = qpo::compute_thresholds(osc(3.0), base.scaled(s));
    EXPECT_GE(T.calI_top, prev_I);
    EXPECT_LE(T.v_star, prev_v);
    prev_I = T.calI_top;
    prev_v = T.v_star;
  }
}

TEST(Thresholds, SafetyFactorScales) {
  const auto T1 = qpo::compute_thresholds(osc(3.0), default_forcing(), {.safety = 1.0});
  const auto T2 = qpo::compute_thresholds(osc(3.0), default_forcing(), {.safety = 3.0});
  EXPECT_GT(T2.calI_top, T1.calI_top);
  EXPECT_THROW(qpo::compute_thresholds(osc(3.0), default_forcing(), {.safety = 0.5}), qpo::DomainError);
}

TEST(Thresholds, MeasuredBracketHolds) {
  const auto f = default_forcing();
  const auto T = qpo::compute_thresholds(osc(3.0), f);
  const auto& p = osc(3.0).p;
  // Off-grid phases and levels stay inside the measured bracket up to grid slack.
  for (double th : {0.13, 0.58, 0.91}) {
    qpo::Model m(osc(3.0), f.line(qpo::TorusPoint({th, 1.0 - th})));
    for (double I : {T.I_C0 * 1.7, 1e3, 3.3e5}) {
      for (int i = 0; i < 40; ++i) {
        const double ratio = m.solve_H(0.017 + i * 0.11, I, 0.05 + i * 0.157) / std::pow(I, p.ex.k);
        EXPECT_GT(ratio, T.alpha0 * 0.98);
        EXPECT_LT(ratio, T.beta0 * 1.02);
      }
    }
  }
}
