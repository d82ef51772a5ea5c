#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <map>
#include <random>

#include "qpo/dop853.hpp"
#include "qpo/special_functions.hpp"

namespace {

constexpr double kPi = std::numbers::pi;

// Tanh-sinh quadrature on [0, 1]; tolerates integrable endpoint singularities.
template <class F>
double tanh_sinh01(F f) {
  const double h = 1.0 / 64.0;
  double sum = 0.0;
  for (int k = -400; k <= 400; ++k) {
    const double t = k * h;
    const double u = 0.5 * kPi * std::sinh(t);
    const double x = 0.5 * (1.0 + std::tanh(u));
    const double one_minus_x = 0.5 / (std::exp(2 * u) + 1.0) * 2.0;
    const double w = 0.5 * 0.5 * kPi * std::cosh(t) / (std::cosh(u) * std::cosh(u));
    if (one_minus_x <= 0.0 || x <= 0.0) continue;
    sum += w * f(x, one_minus_x);
  }
  return sum * h;
}

// Quarter period of x'' + |x|^(a-1) x = 0 from (1, 0).
double quarter_period_quadrature(double alpha) {
  return tanh_sinh01([alpha](double x, double omx) {
    // 1 - x^(a+1) computed stably near x = 1.
    const double d = x > 0.5 ? -std::expm1((alpha + 1.0) * std::log1p(-omx)) : 1.0 - std::pow(x, alpha + 1.0);
    return 1.0 / std::sqrt(2.0 / (alpha + 1.0) * d);
  });
}

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

const qpo::Oscillator& osc(double alpha) {
  static std::map<double, qpo::Oscillator> cache;
  auto it = cache.find(alpha);
  if (it == cache.end()) it = cache.emplace(alpha, qpo::Oscillator::make(alpha)).first;
  return it->second;
}

}  // namespace

TEST(Constants, QuarterPeriodMatchesQuadratureAndElliptic) {
  // For alpha = 3: int_0^1 dx / sqrt(1 - x^4) = K(1/2)/sqrt(2).
  const double k_oracle = elliptic_k(0.5) / std::sqrt(2.0);
  EXPECT_NEAR(quarter_period_quadrature(3.0), std::sqrt(2.0) * k_oracle, 1e-12);
  for (double a : {3.0, 3.5, 4.0, 5.0, 7.0}) {
    const auto p = qpo::derive_params(a);
    EXPECT_NEAR(p.T1, 4.0 * quarter_period_quadrature(a), 1e-11 * p.T1) << a;
  }
  const auto p3 = qpo::derive_params(3.0);
  EXPECT_NEAR(p3.T1, 4.0 * std::sqrt(2.0) * k_oracle, 1e-12);
  EXPECT_NEAR(p3.T1, 7.4162987, 1e-6);
  EXPECT_NEAR(p3.Lambda, 1.1803406, 1e-6);
}

TEST(Constants, DefiningIdentities) {
  for (double a : {3.0, 3.25, 4.0, 5.0, 8.0}) {
    const auto p = qpo::derive_params(a);
    EXPECT_NEAR(p.period(p.Lambda), 2 * kPi, 1e-12);
    EXPECT_NEAR(std::pow(p.gamma, (a + 3) / 2) * (2 / (a + 3)) * std::pow(p.Lambda, a + 1), 1.0, 1e-12);
    EXPECT_NEAR(p.kappa1 / (std::pow(p.gamma * p.Lambda, a + 1) / (a + 1)), 1.0, 1e-12);
    EXPECT_NEAR(p.kappa0 / std::pow(p.kappa1, -(a + 3) / (2 * (a + 1))), 1.0, 1e-12);
    EXPECT_LT(p.b_alpha, p.ex.e);
    EXPECT_LE(p.ex.e, 0.0);
    EXPECT_NEAR(p.ex.em1, p.ex.e - 1.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(qpo::derive_params(3).b_alpha, -0.25);
  EXPECT_DOUBLE_EQ(qpo::derive_params(3).ex.e, 0.0);
  EXPECT_NEAR(qpo::derive_params(5).b_alpha, -7.0 / 12.0, 1e-15);
}

TEST(Constants, Alpha3ChainFromEllipticOracle) {
  // Independent chain: T1 = 4 K(1/2), Lambda = (T1/2pi)^(1/1), gamma^3 = 3/Lambda^4.
  const double T1 = 4.0 * elliptic_k(0.5);
  const double L = T1 / (2 * kPi);
  const double g = std::cbrt(3.0 / std::pow(L, 4));
  const double k1 = std::pow(g * L, 4) / 4.0;
  const auto p = qpo::derive_params(3);
  EXPECT_NEAR(p.Lambda, L, 1e-13);
  EXPECT_NEAR(p.gamma, g, 1e-13);
  EXPECT_NEAR(p.kappa1, k1, 1e-13);
  EXPECT_NEAR(p.kappa0, std::pow(k1, -0.75), 1e-13);
  // Rounded reference values: kappa1 ~ 0.8671, (2 kappa1)^3 ~ 5.216.
  EXPECT_NEAR(p.kappa1, 0.8671, 1e-4);
  EXPECT_NEAR(std::pow(2 * p.kappa1, 3), 5.216, 1e-3);
}

TEST(Constants, RejectsSubcubic) {
  EXPECT_THROW(qpo::derive_params(2.9), qpo::DomainError);
  EXPECT_THROW(qpo::derive_params(NAN), qpo::DomainError);
}

TEST(CSTable, InitialValuesAndQuarterTurn) {
  for (double a : {3.0, 4.0, 5.0}) {
    const auto& o = osc(a);
    auto v0 = o.table.cs(0.0);
    EXPECT_NEAR(v0.c, o.p.Lambda, 1e-13);
    EXPECT_NEAR(v0.s, 0.0, 1e-13);
    auto vq = o.table.cs(kPi / 2);
    EXPECT_NEAR(vq.c, 0.0, 1e-11);
    EXPECT_LT(vq.s, 0.0);
    EXPECT_NEAR(o.table.c1(0.0), 0.0, 1e-14);
  }
}

TEST(CSTable, EnergyIdentityOnFineGrid) {
  for (double a : {3.0, 3.5, 4.0, 5.0}) {
    const auto& o = osc(a);
    const double L = std::pow(o.p.Lambda, a + 1);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double t = -7.0 + 14.0 * i / 9999.0;
      const auto v = o.table.cs(t);
      worst = std::max(worst, std::abs(0.5 * v.s * v.s + std::pow(std::abs(v.c), a + 1) / (a + 1) - L / (a + 1)));
    }
    EXPECT_LT(worst, 1e-9 * L) << a;
    EXPECT_LT(o.table.achieved_tol(), 1e-11) << a;
  }
}

TEST(CSTable, SymmetriesExercisedThroughReduction) {
  const auto& o = osc(3.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const double t = U(rng);
    const auto a = o.table.cs(t), b = o.table.cs(-t), c = o.table.cs(t + kPi);
    EXPECT_NEAR(a.c, b.c, 1e-10);
    EXPECT_NEAR(a.s, -b.s, 1e-10);
    EXPECT_NEAR(a.c, -c.c, 1e-10);
    EXPECT_NEAR(a.s, -c.s, 1e-10);
    EXPECT_NEAR(o.table.c1(t), -o.table.c1(-t), 1e-10);
    EXPECT_NEAR(o.table.c1(t), -o.table.c1(t + kPi), 1e-10);
  }
}

TEST(CSTable, ClockwiseAndDerivativeRelations) {
  for (double a : {3.0, 5.0}) {
    const auto& o = osc(a);
    const double h = 1e-5;
    for (int i = 1; i < 200; ++i) {
      const double t = 2 * kPi * i / 200.0;
      const auto v = o.table.cs(t);
      if (t < kPi - 1e-9) {
        EXPECT_LT(v.s, 0.0);
      } else if (t > kPi + 1e-9) {
        EXPECT_GT(v.s, 0.0);
      }
      const auto p = o.table.cs(t + h), m = o.table.cs(t - h);
      EXPECT_NEAR((p.c - m.c) / (2 * h), v.s, 1e-8);
      EXPECT_NEAR((p.s - m.s) / (2 * h), -qpo::odd_power(o.p, v.c), 1e-8);
      EXPECT_NEAR((o.table.c1(t + h) - o.table.c1(t - h)) / (2 * h), v.c, 1e-8);
    }
  }
}

TEST(CSTable, ZeroMeans) {
  for (double a : {3.0, 4.0, 5.0}) {
    const auto& o = osc(a);
    // Trapezoid rule is spectrally accurate for periodic integrands.
    const int n = 4096;
    double mc = 0, ms = 0, m1 = 0;
    for (int i = 0; i < n; ++i) {
      const auto v = o.table.all(2 * kPi * i / n);
      mc += v.c;
      ms += v.s;
      m1 += v.c1;
    }
    EXPECT_LT(std::abs(mc / n), 1e-10);
    EXPECT_LT(std::abs(ms / n), 1e-10);
    EXPECT_LT(std::abs(m1 / n), 1e-10);
  }
}

TEST(CSTable, FullPeriodReturn) {
  const auto& o = osc(3.0);
  auto rhs = [&](double, const qpo::ode::State<2>& y, qpo::ode::State<2>& dy) {
    dy[0] = y[1];
    dy[1] = -qpo::odd_power(o.p, y[0]);
  };
  qpo::ode::Options opt;
  opt.rtol = opt.atol = 1e-13;
  auto y = qpo::ode::integrate<2>(rhs, 0.0, qpo::ode::State<2>{o.p.Lambda, 0.0}, 2 * kPi, opt);
  EXPECT_NEAR(y[0], o.p.Lambda, 1e-8);
  EXPECT_NEAR(y[1], 0.0, 1e-8);
}

TEST(CSTable, CacheRoundTripIsBitIdentical) {
  const auto p = qpo::derive_params(4.0);
  const auto dir = std::filesystem::temp_directory_path() / "qpo_cs_cache_test";
  std::filesystem::remove_all(dir);
  auto built = qpo::CSTable::load_or_build(p, 1e-13, dir);
  ASSERT_TRUE(std::filesystem::exists(qpo::CSTable::cache_file(dir, 4.0, 1e-13)));
  qpo::CSTable loaded;
  ASSERT_TRUE(qpo::CSTable::load(qpo::CSTable::cache_file(dir, 4.0, 1e-13), p, 1e-13, loaded));
  for (int i = 0; i < 100; ++i) {
    const double t = 0.123 * i;
    EXPECT_EQ(built.cs(t).c, loaded.cs(t).c);
    EXPECT_EQ(built.c1(t), loaded.c1(t));
  }
  qpo::CSTable other;
  EXPECT_FALSE(qpo::CSTable::load(qpo::CSTable::cache_file(dir, 4.0, 1e-13), p, 1e-12, other));
  std::filesystem::remove_all(dir);
}
