#pragma once

// The forced equation x'' + |x|^(alpha-1) x = p(t) in Cartesian form, and the
// zero-to-zero successor map computed directly from it.

#include <cmath>
#include <limits>
#include <string>

#include "qpo/dop853.hpp"
#include "qpo/error.hpp"
#include "qpo/forcing.hpp"
#include "qpo/special_functions.hpp"

namespace qpo {

struct CartesianState {
  double x = 0, v = 0, t = 0;
};

struct ZeroEvent {
  double t1 = 0, v1 = 0;
};

inline double energy(const AlphaParams& p, double x, double v) {
  return 0.5 * v * v + std::pow(std::abs(x), p.alpha + 1.0) / (p.alpha + 1.0);
}
inline double energy(const AlphaParams& p, const CartesianState& s) { return energy(p, s.x, s.v); }

namespace detail {
struct CartesianField {
  const AlphaParams& p;
  const ForcingLine& f;
  void operator()(double t, const ode::State<2>& y, ode::State<2>& dy) const {
    dy[0] = y[1];
    dy[1] = -odd_power(p, y[0]) + f.eval(t, 0);
  }
};

inline ode::Options cartesian_options(double tol, double scale) {
  ode::Options o;
  o.rtol = tol;
  o.atol = tol * std::max(1.0, scale);
  o.max_steps = 50'000'000;
  return o;
}
}  // namespace detail

inline CartesianState integrate(const AlphaParams& p, const ForcingLine& f, const CartesianState& s, double t_end,
                                double tol) {
  if (!(tol > 0)) throw DomainError("tolerance must be positive");
  detail::CartesianField field{p, f};
  ode::Dop853<2, detail::CartesianField> solver(field);
  const auto r = solver.integrate(s.t, {s.x, s.v}, t_end,
                                  detail::cartesian_options(tol, std::abs(s.v) + std::abs(s.x)));
  return {r.y[0], r.y[1], t_end};
}

struct PsiDirectOptions {
  double tol = 1e-12;
  double horizon = 1e4;                                       // max t1 - t0
  double v_star = std::numeric_limits<double>::infinity();    // require v0 < v_star
};

// First t1 > t0 with x(t1) = 0 and x'(t1) < 0, starting from x(t0) = 0, x'(t0) = v0.
inline ZeroEvent psi_direct(const AlphaParams& p, const ForcingLine& f, double v0, double t0,
                            const PsiDirectOptions& o = {}) {
  if (!(v0 < 0.0) || !(v0 < o.v_star)) throw DomainError("psi_direct needs v0 < min(0, v_*)");
  detail::CartesianField field{p, f};
  ode::Dop853<2, detail::CartesianField> solver(field);
  const double x_tol = 1e-11;
  ZeroEvent ev;
  bool found = false;
  constexpr int kProbe = 8;
  auto observer = [&](auto& st) {
    double ta = st.t_old(), xa = st.y_old()[0];
    for (int i = 1; i <= kProbe && !found; ++i) {
      const double tb = i == kProbe ? st.t_new() : st.t_old() + (st.t_new() - st.t_old()) * i / kProbe;
      const double xb = i == kProbe ? st.y_new()[0] : st.dense(tb)[0];
      if (xa > 0.0 && xb <= 0.0) {
        // Brent-style bracketed refinement on the dense interpolant.
        double lo = ta, hi = tb, flo = xa, fhi = xb;
        double root = hi, vroot = 0.0;
        for (int it = 0; it < 200; ++it) {
          double m = lo - flo * (hi - lo) / (fhi - flo);
          if (!(m > lo && m < hi) || it % 3 == 2) m = 0.5 * (lo + hi);
          const auto ym = st.dense(m);
          root = m;
          vroot = ym[1];
          if (std::abs(ym[0]) <= x_tol * std::max(1.0, std::abs(ym[1])) * 1e-2 || hi - lo < 1e-15 * std::abs(m))
            break;
          if (ym[0] > 0.0) {
            lo = m;
            flo = ym[0];
          } else {
            hi = m;
            fhi = ym[0];
          }
        }
        if (vroot < 0.0) {
          ev = {root, vroot};
          found = true;
        }
      }
      ta = tb;
      xa = xb;
    }
    if (found) return false;
    if (st.t_new() - t0 > o.horizon)
      throw NumericError("psi_direct: no negative-velocity zero within horizon " + std::to_string(o.horizon));
    return true;
  };
  solver.integrate(t0, {0.0, v0}, t0 + 2.0 * o.horizon, detail::cartesian_options(o.tol, std::abs(v0)), observer);
  if (!found) throw NumericError("psi_direct: no event found");
  return ev;
}

}  // namespace qpo
