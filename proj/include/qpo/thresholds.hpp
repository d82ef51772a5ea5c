#pragma once

// Constructive thresholds for the transformation chain. Each "sufficiently
// large" level is produced from a closed-form sufficient bound times a safety
// factor; constants that only exist as suprema are measured on sweeps and the
// defining inequalities are re-checked before returning.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "qpo/error.hpp"
#include "qpo/forcing.hpp"
#include "qpo/special_functions.hpp"
#include "qpo/transforms.hpp"

namespace qpo {

struct Thresholds {
  double safety = 2;
  double r_star = 0;
  double I_star = 0;
  double I_C0 = 0, C0 = 0;
  double I_star2 = 0;     // I_**
  double calI_star = 0;   // calI_*
  double calI_star2 = 0;  // calI_**
  double C0_tilde = 0;
  double calI_top = 0;  // calI^*
  double v_star = 0;
  double alpha0 = 0, beta0 = 0;
  double C = 0;  // one-step gap constant: |calI_1 - calI_0| <= C calI_0^b

  // Bound ingredients, kept for reports.
  double P0 = 0, P1 = 0, P2 = 0;  // sup |p|, |p'|, |p''| over all phases
  double J_T = 0, J_q = 0, J_L = 0;
  double adiabatic_rate = 0;      // ||f1'|| ||c1|| + C0_tilde
  double q_hypothesis = 0;        // 2 pi max(1,|omega|^4) ||f||_C4 ||c||, reported only
  double sweep_top = 0;

  Domain domain() const {
    Domain d;
    d.I_star = I_star;
    d.I_C0 = I_C0;
    d.I_star2 = I_star2;
    d.calI_star = calI_star;
    d.calI_star2 = calI_star2;
    return d;
  }
};

struct ThresholdOptions {
  double safety = 2.0;
  double sweep_top = 1e7;
  int n_theta = 6;
  int n_phi = 16;
  int n_tau = 32;
  int levels_per_decade = 3;
};

namespace detail {

// Fixed torus samples from the additive recurrence with generalized golden ratios.
inline std::vector<TorusPoint> sweep_phases(std::size_t dim, int n) {
  double g = 2.0;
  for (int i = 0; i < 30; ++i) g = std::pow(1.0 + g, 1.0 / double(dim + 1));
  std::vector<TorusPoint> out;
  for (int j = 0; j < n; ++j) {
    std::vector<double> c(dim);
    double a = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      a /= g;
      c[i] = 0.5 + (j + 1) * a;
    }
    out.emplace_back(std::move(c));
  }
  return out;
}

inline std::vector<double> log_levels(double lo, double hi, int per_decade) {
  std::vector<double> v;
  if (!(hi > lo)) return {lo};
  const int n = std::max(2, int(std::ceil(std::log10(hi / lo) * per_decade)) + 1);
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return v;
}

}  // namespace detail

// Smallest r with d_r H_aa >= 1 for every angle and time, using the bound
// |p c| <= P0 Lambda.
inline double find_r_star(const AlphaParams& p, double P0) {
  const double a = p.alpha;
  auto lhs = [&](double r) {
    return 2.0 * (a + 1.0) / (a + 3.0) * p.kappa1 * std::pow(r, (a - 1.0) / (a + 3.0)) -
           2.0 / (a + 3.0) * p.gamma * std::pow(r, -(a + 1.0) / (a + 3.0)) * P0 * p.Lambda;
  };
  double lo = 1e-12, hi = 1.0;
  while (lhs(hi) < 1.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double m = 0.5 * (lo + hi);
    (lhs(m) >= 1.0 ? hi : lo) = m;
  }
  return hi;
}

inline double find_r_star(const AlphaParams& p, const TorusForcing& f) {
  return find_r_star(p, f.line(TorusPoint(std::vector<double>(f.dim(), 0.0))).sup_bound(0));
}

inline Thresholds compute_thresholds(const Oscillator& osc, const TorusForcing& forcing,
                                     const ThresholdOptions& opt = {}) {
  if (!(opt.safety >= 1.0)) throw DomainError("threshold safety factor must be >= 1");
  const AlphaParams& p = osc.p;
  const CSTable& cs = osc.table;
  const auto& x = p.ex;
  Thresholds T;
  T.safety = opt.safety;
  T.sweep_top = opt.sweep_top;
  const auto probe_line = forcing.line(TorusPoint(std::vector<double>(forcing.dim(), 0.0)));
  T.P0 = probe_line.sup_bound(0);
  T.P1 = probe_line.sup_bound(1);
  T.P2 = probe_line.sup_bound(2);
  const double S = opt.safety;
  const double cmax = cs.c_sup(), c1max = cs.c1_sup();
  const Model probe(osc, probe_line);
  const double fc = probe.f_coef(), f1c = std::abs(probe.f1_coef());

  T.r_star = find_r_star(p, T.P0);
  T.I_star = S * (p.kappa1 * std::pow(T.r_star, x.beta) + p.gamma * std::pow(T.r_star, x.a) * T.P0 * cmax);

  // |z| <= 1/2 in H = kappa0 I^k (1-z)^(-k) once I >= 1.5 kappa1 u_z^(a+1).
  const double u_z = std::pow(2.0 * p.gamma * T.P0 * cmax / p.kappa1, 1.0 / p.alpha);
  const double I_z = 1.5 * p.kappa1 * std::pow(u_z, p.alpha + 1.0);
  T.I_C0 = std::max(T.I_star, S * I_z);

  // Sandwich for T: |calI - I| <= calI^e D <= calI/2 once calI >= (2D)^(1/(1-e)).
  const double D = fc * T.P1 * c1max;
  T.J_T = D > 0 ? std::pow(2.0 * D, 1.0 / (1.0 - x.e)) : 0.0;
  T.I_star2 = S * std::max(4.0 * T.I_C0, 2.0 * T.J_T);
  T.calI_star = 0.5 * T.I_star2;
  T.J_q = D > 0 && x.e != 0.0 ? std::pow(2.0 * std::abs(x.e) * D, 1.0 / (1.0 - x.e)) : 0.0;
  T.q_hypothesis = 2.0 * std::numbers::pi * forcing.c4_line_bound() * fc * cmax;

  const auto phases = detail::sweep_phases(forcing.dim(), opt.n_theta);
  std::vector<Model> models;
  for (const auto& th : phases) models.emplace_back(osc, forcing.line(th));

  // C0 and the H bracket from the time-energy remainder R.
  {
    double c0 = 0.0, a0 = std::numeric_limits<double>::infinity(), b0 = 0.0;
    for (double I : detail::log_levels(T.I_C0, opt.sweep_top, opt.levels_per_decade)) {
      const double Irho = std::pow(I, x.rho);
      for (const Model& m : models)
        for (int i = 0; i < opt.n_phi; ++i)
          for (int j = 0; j < opt.n_tau; ++j) {
            const double phi = double(i) / opt.n_phi, tau = 2.0 * std::numbers::pi * j / opt.n_tau;
            const double pv = m.forcing().eval(phi), pd = m.forcing().eval(phi, 1);
            const double c = cs.cs(tau).c;
            const auto hs = m.solve_H_full(pv * c, I);
            if (!(std::abs(hs.z) <= 0.5))
              throw InvariantBreach("threshold sweep: |z| > 1/2 above I_C0 at I=" + std::to_string(I));
            const double R = m.remainder_R(phi, I, tau);
            const double dHdu = hs.H / (x.a * hs.u);
            const double dR_dphi = dHdu * p.gamma * hs.u * pd * c / hs.Fu - fc * pd * c * detail::pw(I, x.e);
            const double dR_dI = dHdu / hs.Fu - p.kappa0 * x.k * std::pow(I, x.k - 1.0) -
                                 x.e * fc * pv * c * detail::pw(I, x.em1);
            c0 = std::max(c0, (std::abs(R) + std::abs(dR_dphi) + I * std::abs(dR_dI)) / Irho);
            const double ratio = hs.H / std::pow(I, x.k);
            a0 = std::min(a0, ratio);
            b0 = std::max(b0, ratio);
          }
    }
    T.C0 = c0;
    T.alpha0 = a0;
    T.beta0 = b0;
  }

  // C0_tilde from the transformed remainder, plus the T sandwich check.
  {
    double ct = 0.0;
    for (double J : detail::log_levels(T.calI_star, opt.sweep_top, opt.levels_per_decade)) {
      const double Jrho = std::pow(J, x.rho);
      for (const Model& m : models)
        for (int i = 0; i < opt.n_phi; ++i)
          for (int j = 0; j < opt.n_tau; ++j) {
            const double vphi = double(i) / opt.n_phi, tau = 2.0 * std::numbers::pi * j / opt.n_tau;
            const auto r = m.remainder_R1_full(vphi, J, tau);
            ct = std::max(ct, (std::abs(r.R1) + std::abs(r.dR1_dvarphi) + J * std::abs(r.dR1_dcalI)) / Jrho);
            const auto te = m.T_inverse(vphi, J, tau);
            if (!(te.I / 2.0 <= J && J <= 2.0 * te.I))
              throw InvariantBreach("threshold sweep: I/2 <= calI <= 2I violated at calI=" + std::to_string(J));
          }
    }
    T.C0_tilde = ct;
  }

  // Level from which calI^(1-b) drifts by at most 2 pi (1-b) rate per turn.
  const double b = p.b_alpha;
  T.adiabatic_rate = f1c * T.P2 * c1max + T.C0_tilde;
  const double Chat = (1.0 - b) * T.adiabatic_rate;
  T.J_L = Chat > 0 ? std::pow(2.0 * std::numbers::pi * Chat / (1.0 - std::pow(2.0, b - 1.0)), 1.0 / (1.0 - b)) : 0.0;
  T.calI_star2 = std::max({4.0 * T.calI_star, S * T.J_L, S * T.J_q});
  T.calI_top = std::max(4.0 * T.calI_star2, std::pow(2.0 * p.kappa1, 0.5 * (p.alpha + 3.0)));
  T.v_star = -2.0 * std::sqrt(T.calI_top);
  T.C = 2.0 * std::numbers::pi * T.adiabatic_rate * std::pow(4.0, -b);

  // Validation of the closed-form levels on grids.
  for (int i = 0; i < 64; ++i)
    for (const Model& m : models) {
      const double th = 2.0 * std::numbers::pi * i / 64.0;
      for (int j = 0; j < 16; ++j) {
        const double t = double(j) / 16.0;
        const double dr = m.aa_vector_field(th, T.r_star, t).first;
        if (!(dr >= 1.0 - 1e-9)) throw InvariantBreach("threshold sweep: d_r H < 1 at r_*");
      }
    }
  {
    const double A = std::abs(x.e) * std::pow(T.calI_star2, x.em1) * c1max * fc * T.P1;
    if (!(A <= 0.5)) throw InvariantBreach("threshold sweep: q-iteration not contracting at calI_**");
  }
  return T;
}

}  // namespace qpo
