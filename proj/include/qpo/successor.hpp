#pragma once

// The Poincare map of the transformed system, the successor map on zeros of
// x it induces, the torus map g, orbit iteration and ensemble statistics.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "qpo/dop853.hpp"
#include "qpo/error.hpp"
#include "qpo/fit.hpp"
#include "qpo/forcing.hpp"
#include "qpo/special_functions.hpp"
#include "qpo/thresholds.hpp"
#include "qpo/transforms.hpp"

namespace qpo {

inline constexpr double kTau0 = std::numbers::pi / 2.0;
inline constexpr double kTau1 = kTau0 + 2.0 * std::numbers::pi;

struct SuccessorPoint {
  double varphi = 0, calI = 0;
};

struct TorusMapPoint {
  TorusPoint theta;
  double calI = 0;
};

struct PhiOptions {
  double tol = 1e-11;
  bool track_rate = false;  // record max |calI'| calI^-b at step ends
};

struct PhiResult {
  SuccessorPoint end;
  double advance = 0;  // varphi1 - varphi0, without cancellation
  double gap = 0;      // calI1 - calI0, without cancellation
  double min_ratio = 1, max_ratio = 1;  // calI(tau) / calI0 over accepted steps
  double max_rate = 0;
  long steps = 0, evals = 0;
};

// Phi: the time-2pi map of the transformed flow from tau = pi/2. The state is
// integrated as an offset from the start point so the gap keeps full relative
// precision at large calI.
inline PhiResult poincare_Phi(const Model& m, const SuccessorPoint& pt, double calI_min, const PhiOptions& o = {}) {
  if (!(pt.calI > calI_min)) throw DomainError("Phi needs calI0 > calI^* (got " + std::to_string(pt.calI) + ")");
  const double v0 = pt.varphi, J0 = pt.calI;
  const double b = m.params().b_alpha;
  auto rhs = [&m, v0, J0](double tau, const ode::State<2>& y, ode::State<2>& dy) {
    const auto q = m.h1_point(v0 + y[0], J0 + y[1], tau);
    dy[0] = q.dvarphi;
    dy[1] = q.dcalI;
  };
  PhiResult r;
  auto obs = [&](auto& st) {
    const double J = J0 + st.y_new()[1];
    const double ratio = J / J0;
    r.min_ratio = std::min(r.min_ratio, ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
    if (!(ratio >= 0.25 && ratio <= 4.0))
      throw InvariantBreach("Phi: calI left [calI0/4, 4 calI0] at tau=" + std::to_string(st.t_new()));
    if (o.track_rate) r.max_rate = std::max(r.max_rate, std::abs(st.f_new()[1]) / std::pow(J, b));
    return true;
  };
  ode::Options opt;
  opt.rtol = o.tol;
  opt.atol = o.tol;
  opt.max_steps = 100000;
  // Accepted steps sit near 0.45 at tol 1e-9 and scale like tol^(1/8); the
  // automatic guess from a zero offset state is far too small.
  opt.h_init = std::min(0.8, 0.4 * std::pow(o.tol / 1e-9, 0.125));
  ode::Dop853<2, decltype(rhs)> solver(rhs);
  if (o.track_rate) {
    ode::State<2> d0;
    rhs(kTau0, {0.0, 0.0}, d0);
    r.max_rate = std::abs(d0[1]) / std::pow(J0, b);
  }
  const auto res = solver.integrate(kTau0, {0.0, 0.0}, kTau1, opt, obs);
  r.advance = res.y[0];
  r.gap = res.y[1];
  r.end = {v0 + r.advance, J0 + r.gap};
  r.steps = solver.stats().accepted;
  r.evals = solver.stats().evals;
  return r;
}

// Everything the composed maps need, by reference.
struct SuccessorContext {
  const Oscillator& osc;
  const TorusForcing& forcing;
  const Thresholds& T;
  PhiOptions phi{};

  Model model(const TorusPoint& theta) const {
    Model m(osc, forcing.line(theta));
    m.set_domain(T.domain());
    return m;
  }
};

struct PsiResult {
  double v1 = 0, t1 = 0;
  SuccessorPoint entry;  // (varphi0, calI0) after R0, S0, T0
  PhiResult phi;
};

// psi through the transformation chain: at x = 0 with v < 0 the angle is pi/2
// and the energy-like variable is v^2/2.
inline PsiResult psi_transformed(const SuccessorContext& ctx, const Model& m, double v0, double t0) {
  if (!(v0 < ctx.T.v_star)) throw DomainError("psi needs v0 < v_* = " + std::to_string(ctx.T.v_star));
  const double I0 = 0.5 * v0 * v0;
  const auto s = m.T_forward(t0, I0, kTau0);
  PsiResult r;
  r.entry = {s.varphi, s.calI};
  if (!(s.calI >= 0.25 * v0 * v0)) throw InvariantBreach("psi: calI0 < v0^2/4 on entry");
  r.phi = poincare_Phi(m, r.entry, ctx.T.calI_top, ctx.phi);
  const auto te = m.T_inverse(r.phi.end.varphi, r.phi.end.calI, kTau1);
  r.t1 = te.phi;
  r.v1 = -std::sqrt(2.0 * te.I);
  return r;
}

inline PsiResult psi_transformed(const SuccessorContext& ctx, const TorusPoint& theta, double v0, double t0) {
  return psi_transformed(ctx, ctx.model(theta), v0, t0);
}

struct FG {
  double F = 0, G = 0;
  PhiResult phi;
};

// Autonomized torus system: the forcing seen at transformed time varphi is
// P(theta0 + iota(varphi)), i.e. the line through theta0 started at zero.
inline FG torus_F_G(const SuccessorContext& ctx, const TorusPoint& theta0, double calI0) {
  const Model m = ctx.model(theta0);
  FG out;
  out.phi = poincare_Phi(m, {0.0, calI0}, ctx.T.calI_top, ctx.phi);
  out.F = out.phi.advance;
  out.G = out.phi.gap;
  return out;
}

inline TorusMapPoint g_map(const SuccessorContext& ctx, const TorusMapPoint& pt) {
  const FG fg = torus_F_G(ctx, pt.theta, pt.calI);
  return {pt.theta + iota(ctx.forcing.omega(), fg.F), pt.calI + fg.G};
}

// Central differences with one Richardson step: (4 D(h/2) - D(h)) / 3.
template <class F>
std::array<double, 4> fd_jacobian(F f, double x, double y, double hx, double hy) {
  auto col = [&](double dx, double dy, double h) {
    const auto p = f(x + dx, y + dy), m = f(x - dx, y - dy);
    return std::array<double, 2>{(p[0] - m[0]) / (2 * h), (p[1] - m[1]) / (2 * h)};
  };
  const auto ax = col(hx, 0, hx), bx = col(hx / 2, 0, hx / 2);
  const auto ay = col(0, hy, hy), by = col(0, hy / 2, hy / 2);
  return {(4 * bx[0] - ax[0]) / 3, (4 * by[0] - ay[0]) / 3, (4 * bx[1] - ax[1]) / 3, (4 * by[1] - ay[1]) / 3};
}

// det D Phi at a point; the identity part of the map is added analytically.
inline double det_Phi(const Model& m, const SuccessorPoint& pt, double calI_min, const PhiOptions& o,
                      double rel_step = 1e-4) {
  auto f = [&](double vp, double J) {
    const auto r = poincare_Phi(m, {vp, J}, calI_min, o);
    return std::array<double, 2>{r.advance, r.gap};
  };
  const auto d = fd_jacobian(f, pt.varphi, pt.calI, rel_step, rel_step * pt.calI);
  return (1.0 + d[0]) * (1.0 + d[3]) - d[1] * d[2];
}

// (1 + d_w F)(1 + d_I G) - d_I F d_w G for g, where d_w differentiates along
// the flow direction theta + iota(s).
inline double det_g(const SuccessorContext& ctx, const TorusMapPoint& pt, double rel_step = 1e-4) {
  auto f = [&](double s, double J) {
    const auto r = torus_F_G(ctx, pt.theta + iota(ctx.forcing.omega(), s), J);
    return std::array<double, 2>{r.F, r.G};
  };
  const auto d = fd_jacobian(f, 0.0, pt.calI, rel_step, rel_step * pt.calI);
  return (1.0 + d[0]) * (1.0 + d[3]) - d[1] * d[2];
}

// Suprema of |I'| along the untransformed flow and of |calI'| along the
// transformed flow over one turn, sampled at dense points of every step.
struct RateProbe {
  double sup_te = 0, sup_h1 = 0;
};

inline RateProbe flow_rate_sup(const Model& m, double phi0, double I0, double tol = 1e-10, int per_step = 8) {
  RateProbe out;
  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  {
    auto rhs = [&m](double tau, const ode::State<2>& y, ode::State<2>& dy) {
      const auto [a, b] = m.te_vector_field(y[0], y[1], tau);
      dy[0] = a;
      dy[1] = b;
    };
    auto obs = [&](auto& st) {
      for (int i = 1; i <= per_step; ++i) {
        const double t = st.t_old() + (st.t_new() - st.t_old()) * i / per_step;
        const auto y = st.dense(t);
        out.sup_te = std::max(out.sup_te, std::abs(m.te_vector_field(y[0], y[1], t).second));
      }
      return true;
    };
    ode::Dop853<2, decltype(rhs)> s(rhs);
    out.sup_te = std::abs(m.te_vector_field(phi0, I0, kTau0).second);
    s.integrate(kTau0, {phi0, I0}, kTau1, opt, obs);
  }
  {
    const auto st0 = m.T_forward(phi0, I0, kTau0);
    auto rhs = [&m](double tau, const ode::State<2>& y, ode::State<2>& dy) {
      const auto [a, b] = m.h1_vector_field(y[0], y[1], tau);
      dy[0] = a;
      dy[1] = b;
    };
    auto obs = [&](auto& st) {
      for (int i = 1; i <= per_step; ++i) {
        const double t = st.t_old() + (st.t_new() - st.t_old()) * i / per_step;
        const auto y = st.dense(t);
        out.sup_h1 = std::max(out.sup_h1, std::abs(m.h1_vector_field(y[0], y[1], t).second));
      }
      return true;
    };
    ode::Dop853<2, decltype(rhs)> s(rhs);
    out.sup_h1 = std::abs(m.h1_vector_field(st0.varphi, st0.calI, kTau0).second);
    s.integrate(kTau0, {st0.varphi, st0.calI}, kTau1, opt, obs);
  }
  return out;
}

// Orbits.

struct OrbitPolicy {
  double growth_factor = 4.0;
  double delta = 0.05;
  int burn_in = 100;
  bool record = true;  // keep every iterate, otherwise only the first and last
};

struct OrbitIterate {
  int n = 0;
  double t = 0, v = 0, varphi = 0, calI = 0;
  TorusPoint theta;
};

struct OrbitSummary {
  int n_completed = 0;
  std::vector<OrbitIterate> iterates;
  bool left_domain = false;
  bool escape_suspect = false;
  bool failed = false;
  std::string failure;
  int recurrence_count = 0;
  double growth_ratio = 1.0;
  // W = calI, k(r) = C r^b: count of steps with calI_{n+1} > calI_n + C calI_n^b.
  int certificate_violations = 0;
  double max_gap_over_bound = 0.0;
};

namespace detail {

inline OrbitIterate make_iterate(const SuccessorContext& ctx, int n, const TorusPoint& theta, double varphi,
                                 double calI) {
  OrbitIterate it;
  it.n = n;
  it.theta = theta;
  it.varphi = varphi;
  it.calI = calI;
  // Back to (t, v) through T^-1 at tau = pi/2 on the line through theta.
  const auto te = ctx.model(theta).T_inverse(0.0, calI, kTau0);
  it.t = varphi + te.phi;
  it.v = -std::sqrt(2.0 * te.I);
  return it;
}

}  // namespace detail

// Iterates g from (theta0, calI0) with varphi0 recorded as the planar angle
// that theta0 corresponds to.
inline OrbitSummary iterate_orbit(const SuccessorContext& ctx, const TorusMapPoint& start, double varphi0, int n_max,
                                  const OrbitPolicy& pol = {}) {
  OrbitSummary s;
  const double J0 = start.calI;
  const double b = ctx.osc.p.b_alpha;
  TorusMapPoint cur = start;
  double varphi = varphi0;
  auto keep = [&](const OrbitIterate& it) {
    if (pol.record || s.iterates.size() < 2)
      s.iterates.push_back(it);
    else
      s.iterates.back() = it;
  };
  try {
    keep(detail::make_iterate(ctx, 0, cur.theta, varphi, cur.calI));
  } catch (const Error& e) {
    s.failed = true;
    s.failure = e.what();
    return s;
  }
  if (!(cur.calI > ctx.T.calI_top)) {
    s.left_domain = true;
    return s;
  }
  bool grown_since_burn = true;
  for (int n = 1; n <= n_max; ++n) {
    FG fg;
    try {
      fg = torus_F_G(ctx, cur.theta, cur.calI);
    } catch (const Error& e) {
      s.failed = true;
      s.failure = e.what();
      break;
    }
    const double bound = ctx.T.C * std::pow(cur.calI, b);
    if (fg.G > bound) ++s.certificate_violations;
    if (bound > 0) s.max_gap_over_bound = std::max(s.max_gap_over_bound, std::abs(fg.G) / bound);
    cur.theta = cur.theta + iota(ctx.forcing.omega(), fg.F);
    cur.calI += fg.G;
    varphi += fg.F;
    s.n_completed = n;
    const double ratio = cur.calI / J0;
    s.growth_ratio = std::max(s.growth_ratio, ratio);
    if (std::abs(cur.calI - J0) < pol.delta * J0) ++s.recurrence_count;
    if (n >= pol.burn_in && !(ratio > pol.growth_factor)) grown_since_burn = false;
    const bool last = n == n_max || !(cur.calI > ctx.T.calI_top);
    if (pol.record || last) {
      try {
        keep(detail::make_iterate(ctx, n, cur.theta, varphi, cur.calI));
      } catch (const Error& e) {
        s.failed = true;
        s.failure = e.what();
        break;
      }
    }
    if (!(cur.calI > ctx.T.calI_top)) {
      s.left_domain = true;
      break;
    }
  }
  if (s.failed && !pol.record && s.n_completed > s.iterates.back().n) {
    try {
      keep(detail::make_iterate(ctx, s.n_completed, cur.theta, varphi, cur.calI));
    } catch (const Error&) {
    }
  }
  s.escape_suspect = s.n_completed >= pol.burn_in && grown_since_burn;
  return s;
}

// Orbit of psi started from a zero of x at time t0 with velocity v0 under
// the forcing with phase Theta.
inline OrbitSummary iterate_orbit(const SuccessorContext& ctx, const TorusPoint& Theta, double v0, double t0, int n_max,
                                  const OrbitPolicy& pol = {}) {
  if (!(v0 < ctx.T.v_star)) throw DomainError("orbit needs v0 < v_* = " + std::to_string(ctx.T.v_star));
  const auto s = ctx.model(Theta).T_forward(t0, 0.5 * v0 * v0, kTau0);
  return iterate_orbit(ctx, {Theta + iota(ctx.forcing.omega(), s.varphi), s.calI}, s.varphi, n_max, pol);
}

// Ensembles.

// SplitMix64 streams keyed by (seed, tag, index), so every sample is
// independent of evaluation order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t s) : s_(s) {}
  SplitMix64(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
      : s_(mix(seed ^ mix(tag + 0x9E3779B97F4A7C15ull) ^ mix(index * 0xD1B54A32D192ED03ull + 1))) {}
  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
    return mix(z);
  }
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }  // [0, 1)

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  std::uint64_t s_;
};

struct EnsembleConfig {
  int n_theta = 64;
  int n_orbits = 256;
  int n_max = 1000;
  double calI_lo = 1e4, calI_hi = 1e5;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency
  OrbitPolicy policy{.record = false};
  int gap_samples = 64;
  std::vector<double> gap_levels{1e3, 1e4, 1e5, 1e6, 1e7};
  int det_checks = 30;

  void validate() const {
    if (n_theta < 1 || n_orbits < 1 || n_max < 1) throw ConfigError("ensemble counts must be positive");
    if (!(calI_lo > 0) || !(calI_hi >= calI_lo)) throw ConfigError("ensemble calI window must satisfy 0 < lo <= hi");
    if (!(policy.growth_factor > 1) || !(policy.delta > 0) || policy.burn_in < 0)
      throw ConfigError("orbit policy out of range");
    if (gap_samples < 0 || det_checks < 0) throw ConfigError("probe counts must be non-negative");
    for (double l : gap_levels)
      if (!(l > 0)) throw ConfigError("gap levels must be positive");
  }
};

struct EnsembleOrbit {
  int orbit_id = 0;
  int theta_index = 0;
  TorusPoint Theta;
  double varphi0 = 0, calI0 = 0;
  OrbitSummary summary;
};

struct GapProbe {
  std::vector<double> levels;   // levels above calI^* actually probed
  std::vector<double> max_gap;  // max |calI1 - calI0| per level
  std::vector<double> skipped;  // requested levels at or below calI^*
  LineFit fit;
  double max_gap_over_bound = 0;  // max |gap| / (C calI0^b)
  double max_rate_over_bound = 0;  // max |calI'| calI^-b / (||f1'|| ||c1|| + C0_tilde)
  int violations = 0;
  double sandwich_min = 1, sandwich_max = 1;
};

struct EnsembleResult {
  std::vector<EnsembleOrbit> orbits;
  std::size_t n_orbits = 0, n_escape_suspect = 0, n_left_domain = 0, n_failed = 0;
  double escape_fraction = 0;
  double max_growth_ratio = 1;
  double mean_recurrence = 0;
  std::size_t map_applications = 0, certificate_violations = 0;
  GapProbe gap;
  std::vector<double> det_residuals;
  double max_det_residual = 0;
};

namespace detail {

inline TorusPoint random_torus_point(SplitMix64& g, std::size_t dim) {
  std::vector<double> c(dim);
  for (auto& x : c) x = g.uniform();
  return TorusPoint(std::move(c));
}

inline unsigned thread_count(unsigned requested, std::size_t work) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return unsigned(std::min<std::size_t>(n, std::max<std::size_t>(1, work)));
}

// Runs body(i) for i in [0, n) on a small pool; body writes into its own slot.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  const unsigned nt = thread_count(threads, n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nt; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

// Gap |calI1 - calI0| of Phi against calI0 at fixed random (varphi0, Theta).
inline GapProbe gap_probe(const SuccessorContext& ctx, const std::vector<double>& levels, int samples,
                          std::uint64_t seed, unsigned threads = 0) {
  GapProbe g;
  for (double l : levels) (l > ctx.T.calI_top ? g.levels : g.skipped).push_back(l);
  g.max_gap.assign(g.levels.size(), 0.0);
  if (samples <= 0 || g.levels.empty()) return g;
  const double b = ctx.osc.p.b_alpha;
  struct Slot {
    std::vector<double> gap;
    double over = 0, rate = 0, lo = 1, hi = 1;
    int viol = 0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(samples));
  SuccessorContext c2 = ctx;
  c2.phi.track_rate = true;
  const double rate_bound = ctx.T.adiabatic_rate;
  detail::parallel_for(slots.size(), threads, [&](std::size_t k) {
    SplitMix64 rng(seed, 2, k);
    const TorusPoint Theta = detail::random_torus_point(rng, ctx.forcing.dim());
    const double vp = 2.0 * std::numbers::pi * rng.uniform();
    const Model m = c2.model(Theta);
    Slot& s = slots[k];
    for (double J : g.levels) {
      const auto r = poincare_Phi(m, {vp, J}, ctx.T.calI_top, c2.phi);
      s.gap.push_back(std::abs(r.gap));
      const double bound = ctx.T.C * std::pow(J, b);
      s.over = std::max(s.over, std::abs(r.gap) / bound);
      if (std::abs(r.gap) > bound) ++s.viol;
      if (rate_bound > 0) s.rate = std::max(s.rate, r.max_rate / rate_bound);
      s.lo = std::min(s.lo, r.min_ratio);
      s.hi = std::max(s.hi, r.max_ratio);
    }
  });
  for (const Slot& s : slots) {
    for (std::size_t i = 0; i < g.levels.size(); ++i) g.max_gap[i] = std::max(g.max_gap[i], s.gap[i]);
    g.max_gap_over_bound = std::max(g.max_gap_over_bound, s.over);
    g.max_rate_over_bound = std::max(g.max_rate_over_bound, s.rate);
    g.violations += s.viol;
    g.sandwich_min = std::min(g.sandwich_min, s.lo);
    g.sandwich_max = std::max(g.sandwich_max, s.hi);
  }
  g.fit = fit_loglog(g.levels, g.max_gap);
  return g;
}

inline EnsembleResult ensemble_run(const SuccessorContext& ctx, const EnsembleConfig& cfg) {
  cfg.validate();
  EnsembleResult res;
  const std::size_t dim = ctx.forcing.dim();
  const std::size_t total = std::size_t(cfg.n_theta) * std::size_t(cfg.n_orbits);
  res.orbits.resize(total);
  res.n_orbits = total;
  const auto& omega = ctx.forcing.omega();
  detail::parallel_for(std::size_t(cfg.n_theta), cfg.threads, [&](std::size_t i) {
    SplitMix64 tr(cfg.seed, 0, i);
    const TorusPoint Theta = detail::random_torus_point(tr, dim);
    for (int j = 0; j < cfg.n_orbits; ++j) {
      const std::size_t id = i * std::size_t(cfg.n_orbits) + std::size_t(j);
      SplitMix64 rng(cfg.seed, 1, id);
      EnsembleOrbit& o = res.orbits[id];
      o.orbit_id = int(id);
      o.theta_index = int(i);
      o.Theta = Theta;
      o.varphi0 = 2.0 * std::numbers::pi * rng.uniform();
      o.calI0 = cfg.calI_lo + (cfg.calI_hi - cfg.calI_lo) * rng.uniform();
      o.summary = iterate_orbit(ctx, {Theta + iota(omega, o.varphi0), o.calI0}, o.varphi0, cfg.n_max, cfg.policy);
    }
  });
  double rec = 0;
  for (const auto& o : res.orbits) {
    const auto& s = o.summary;
    res.n_escape_suspect += s.escape_suspect;
    res.n_left_domain += s.left_domain;
    res.n_failed += s.failed;
    res.max_growth_ratio = std::max(res.max_growth_ratio, s.growth_ratio);
    rec += s.recurrence_count;
    res.map_applications += std::size_t(s.n_completed);
    res.certificate_violations += std::size_t(s.certificate_violations);
  }
  res.escape_fraction = total ? double(res.n_escape_suspect) / double(total) : 0.0;
  res.mean_recurrence = total ? rec / double(total) : 0.0;
  res.gap = gap_probe(ctx, cfg.gap_levels, cfg.gap_samples, cfg.seed, cfg.threads);
  res.det_residuals.assign(std::size_t(cfg.det_checks), 0.0);
  detail::parallel_for(res.det_residuals.size(), cfg.threads, [&](std::size_t k) {
    SplitMix64 rng(cfg.seed, 3, k);
    const TorusPoint th = detail::random_torus_point(rng, dim);
    const double J = cfg.calI_lo + (cfg.calI_hi - cfg.calI_lo) * rng.uniform();
    SuccessorContext tight = ctx;
    tight.phi.tol = std::min(ctx.phi.tol, 1e-12);
    tight.phi.track_rate = false;
    res.det_residuals[k] = std::abs(det_g(tight, {th, J}) - 1.0);
  });
  for (double d : res.det_residuals) res.max_det_residual = std::max(res.max_det_residual, d);
  return res;
}

}  // namespace qpo
