#pragma once

// Coordinate changes for the forced oscillator:
//   eta      (x, v)        <-> (theta, r)       action-angle
//   S        (theta, r; t) <-> (phi, I; tau)    time and energy, angle as clock
//   T        (phi, I; tau) <-> (varphi, calI)   generating-function shear
// together with the Hamiltonians and vector fields in each chart.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "qpo/error.hpp"
#include "qpo/forcing.hpp"
#include "qpo/special_functions.hpp"

namespace qpo {

struct ActionAngleState {
  double theta = 0, r = 0, t = 0;
};

struct TimeEnergyState {
  double phi = 0, I = 0, tau = 0;
};

struct TransformedState {
  double varphi = 0, calI = 0, tau = 0;
};

// Lower limits below which the operations refuse to run. Zero means the
// corresponding check is off; compute_thresholds fills them in.
struct Domain {
  double I_star = 0;      // solve_H, te_vector_field
  double I_C0 = 0;        // remainder_R
  double I_star2 = 0;     // T_forward
  double calI_star = 0;   // remainder_R1
  double calI_star2 = 0;  // T_inverse, solve_q, h1_vector_field
};

namespace detail {
inline double ipow(double x, int n) {
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}
inline double pw(double x, double y) {
  if (y == 0.0) return 1.0;
  if (y == 1.0) return x;
  if (y == -1.0) return 1.0 / x;
  return std::pow(x, y);
}
}  // namespace detail

class Model {
 public:
  // Full state of the transformed field at one point, for callers that need
  // more than the two derivatives.
  struct H1Point {
    double phi, I, r, u, Fu;
    double c, s, c1;
    double p0, p1, p2;  // p, p', p'' at phi
    double dphi, dI;    // time-energy field at (phi, I)
    double dvarphi, dcalI;
  };

  Model(const Oscillator& osc, ForcingLine f) : p_(osc.p), cs_(osc.table), f_(std::move(f)) {
    const auto& x = p_.ex;
    fcoef_ = x.k * p_.gamma * std::pow(p_.kappa0, (p_.alpha + 5.0) / (p_.alpha + 3.0));
    f1coef_ = -x.k * x.k * p_.gamma * std::pow(p_.kappa0, (2.0 * p_.alpha + 8.0) / (p_.alpha + 3.0));
    aint_ = p_.alpha_int;
    gamma_v_ = std::pow(p_.gamma, 0.5 * (p_.alpha + 1.0));
  }

  const AlphaParams& params() const { return p_; }
  const CSTable& table() const { return cs_; }
  const ForcingLine& forcing() const { return f_; }
  const Domain& domain() const { return dom_; }
  void set_domain(const Domain& d) { dom_ = d; }

  // f = k gamma kappa0^((a+5)/(a+3)) p and f1 = -k^2 gamma kappa0^((2a+8)/(a+3)) p'.
  double f_coef() const { return fcoef_; }
  double f1_coef() const { return f1coef_; }

  // ---- action-angle chart ----

  std::pair<double, double> from_action_angle(double theta, double r) const {
    if (!(r > 0.0)) throw DomainError("from_action_angle: r must be positive");
    const auto v = cs_.cs(theta);
    return {p_.gamma * detail::pw(r, p_.ex.a) * v.c, gamma_v_ * detail::pw(r, p_.ex.br) * v.s};
  }

  ActionAngleState to_action_angle(double x, double v, double t) const {
    if (x == 0.0 && v == 0.0) throw DomainError("to_action_angle: origin has no angle");
    const double E = 0.5 * v * v + std::pow(std::abs(x), p_.alpha + 1.0) / (p_.alpha + 1.0);
    const double r = std::pow(E / p_.kappa1, p_.ex.k);
    const double cb = x / (p_.gamma * detail::pw(r, p_.ex.a));
    const double sb = v / (gamma_v_ * detail::pw(r, p_.ex.br));
    const double u = quarter_angle(std::abs(cb), -std::abs(sb));
    constexpr double pi = std::numbers::pi;
    double th;
    if (sb <= 0.0)
      th = cb >= 0.0 ? u : pi - u;
    else
      th = cb <= 0.0 ? pi + u : 2.0 * pi - u;
    return {th, r, t};
  }

  double hamiltonian_aa(double theta, double r, double t) const {
    if (!(r > 0.0)) throw DomainError("hamiltonian_aa: r must be positive");
    return p_.kappa1 * detail::pw(r, p_.ex.beta) - p_.gamma * detail::pw(r, p_.ex.a) * f_.eval(t) * cs_.cs(theta).c;
  }

  // (d theta/dt, dr/dt).
  std::pair<double, double> aa_vector_field(double theta, double r, double t) const {
    if (!(r > 0.0)) throw DomainError("aa_vector_field: r must be positive");
    const double a = p_.alpha;
    const auto v = cs_.cs(theta);
    const double pt = f_.eval(t);
    const double dth = 2.0 * (a + 1.0) / (a + 3.0) * p_.kappa1 * std::pow(r, (a - 1.0) / (a + 3.0)) -
                       2.0 / (a + 3.0) * p_.gamma * std::pow(r, -(a + 1.0) / (a + 3.0)) * pt * v.c;
    const double dr = p_.gamma * detail::pw(r, p_.ex.a) * pt * v.s;
    return {dth, dr};
  }

  // ---- time-energy chart ----

  struct HSolve {
    double H, u, Fu, z;
  };

  // Solves kappa1 H^beta - gamma H^a P = I for the branch continuing the
  // unperturbed solution, with P = p(phi) c(tau), working in u = H^a:
  // F(u) = kappa1 u^(a+1) - gamma u P is convex and increasing past its
  // minimum, which isolates the root.
  HSolve solve_H_full(double P, double I, double rel_tol = 1e-15) const {
    if (!(I > 0.0)) throw DomainError("solve_H: energy must be positive");
    const double k1 = p_.kappa1, g = p_.gamma, ap1 = p_.alpha + 1.0;
    const double gP = g * P;
    // Newton from the unperturbed root; F is convex and increasing on the
    // branch, so iterates settle on the right of the root after one step.
    // The relative error after a step du is about (alpha/2)(du/u)^2.
    const double stop = std::sqrt(rel_tol / std::max(1.0, 0.5 * p_.alpha));
    double u = root_alpha1(I / k1);
    for (int it = 0; it < 8; ++it) {
      const double ua = upow_alpha(u);
      const double Fu = k1 * ap1 * ua - gP;
      if (!(Fu > 0.0)) break;
      const double du = (k1 * ua * u - gP * u - I) / Fu;
      const double un = u - du;
      if (!(un > 0.0) || !std::isfinite(un)) break;
      u = un;
      if (std::abs(du) <= stop * u) {
        const double ub = upow_alpha(u);
        return {h_from_u(u), u, k1 * ap1 * ub - gP, gP / (k1 * ub)};
      }
    }
    return solve_H_bracketed(gP, I, rel_tol);
  }

  double solve_H(double phi, double I, double tau, double tol = 1e-15) const {
    check(I, dom_.I_star, "solve_H: I below I_*");
    return solve_H_full(f_.eval(phi) * cs_.cs(tau).c, I, tol).H;
  }

  // Residual of kappa1 H^beta - gamma H^a p c = I for a candidate H.
  double implicit_residual(double phi, double I, double tau, double H) const {
    return p_.kappa1 * std::pow(H, p_.ex.beta) - p_.gamma * std::pow(H, p_.ex.a) * f_.eval(phi) * cs_.cs(tau).c - I;
  }

  // H - kappa0 I^k - f c I^e, evaluated without cancellation in the first
  // difference.
  double remainder_R(double phi, double I, double tau) const {
    check(I, dom_.I_C0, "remainder_R: I below I_C0");
    const double pv = f_.eval(phi), c = cs_.cs(tau).c;
    const auto hs = solve_H_full(pv * c, I);
    const double base = p_.kappa0 * std::pow(I, p_.ex.k);
    const double dH = base * std::expm1(-p_.ex.k * std::log1p(-hs.z));
    return dH - fcoef_ * pv * c * detail::pw(I, p_.ex.e);
  }

  // (dphi/dtau, dI/dtau) = (dH/dI, -dH/dphi) by implicit differentiation.
  std::pair<double, double> te_vector_field(double phi, double I, double tau) const {
    check(I, dom_.I_star, "te_vector_field: I below I_*");
    double pv[2];
    f_.eval_upto(phi, 1, pv);
    const double c = cs_.cs(tau).c;
    const auto hs = solve_H_full(pv[0] * c, I);
    const double dHdu = hs.H / (p_.ex.a * hs.u);
    return {dHdu / hs.Fu, -dHdu * p_.gamma * hs.u * pv[1] * c / hs.Fu};
  }

  // ---- generating-function transform ----

  // Solves q = e calI^(e-1) c1(tau) f(varphi + q) by fixed-point iteration.
  double solve_q(double varphi, double calI, double tau, double tol = 1e-15) const {
    check(calI, dom_.calI_star2, "solve_q: calI below calI_**");
    return solve_q_unchecked(varphi, calI, cs_.c1(tau), tol);
  }

  TransformedState T_forward(double phi, double I, double tau) const {
    check(I, dom_.I_star2, "T_forward: I below I_**");
    const double c1 = cs_.c1(tau);
    double pv[2];
    f_.eval_upto(phi, 1, pv);
    const double D = fcoef_ * pv[1] * c1;  // f'(phi) c1(tau)
    const double e = p_.ex.e;
    double J;
    if (e == 0.0) {
      J = I + D;
    } else {
      // J - J^e D = I, Newton from J = I; the map is a small perturbation of the identity.
      J = I;
      bool ok = false;
      for (int it = 0; it < 50; ++it) {
        const double Je = std::pow(J, e);
        const double g = J - Je * D - I;
        const double dg = 1.0 - e * Je / J * D;
        const double Jn = J - g / dg;
        if (!(Jn > 0.0)) throw NumericError("T_forward: Newton left the positive axis");
        const double d = std::abs(Jn - J);
        J = Jn;
        if (d <= 1e-15 * J) {
          ok = true;
          break;
        }
      }
      if (!ok) throw NumericError("T_forward: Newton did not converge");
    }
    const double varphi = phi - e * detail::pw(J, p_.ex.em1) * fcoef_ * pv[0] * c1;
    return {varphi, J, tau};
  }

  TimeEnergyState T_inverse(double varphi, double calI, double tau) const {
    check(calI, dom_.calI_star2, "T_inverse: calI below calI_**");
    const double c1 = cs_.c1(tau);
    const double phi = varphi + solve_q_unchecked(varphi, calI, c1, 1e-15);
    const double I = calI - detail::pw(calI, p_.ex.e) * fcoef_ * f_.eval(phi, 1) * c1;
    return {phi, I, tau};
  }

  // Full transformed field by conjugating the time-energy field through T.
  H1Point h1_point(double varphi, double calI, double tau) const {
    H1Point o;
    const auto v = cs_.all(tau);
    o.c = v.c;
    o.s = v.s;
    o.c1 = v.c1;
    const double e = p_.ex.e;
    const double Je = detail::pw(calI, e), Jem1 = detail::pw(calI, p_.ex.em1);
    o.phi = e == 0.0 ? varphi : varphi + solve_q_unchecked(varphi, calI, v.c1, 1e-15);
    double pv[3];
    f_.eval_upto(o.phi, 2, pv);
    o.p0 = pv[0];
    o.p1 = pv[1];
    o.p2 = pv[2];
    const double f0 = fcoef_ * pv[0], f1 = fcoef_ * pv[1], f2 = fcoef_ * pv[2];
    o.I = calI - Je * f1 * v.c1;
    if (!(o.I > 0.0)) throw NumericError("h1 field: preimage energy not positive");
    const auto hs = solve_H_full(pv[0] * v.c, o.I);
    o.r = hs.H;
    o.u = hs.u;
    o.Fu = hs.Fu;
    const double dHdu = hs.H / (p_.ex.a * hs.u);
    o.dphi = dHdu / hs.Fu;
    o.dI = -dHdu * p_.gamma * hs.u * pv[1] * v.c / hs.Fu;
    o.dcalI = (o.dI + Je * (f2 * o.dphi * v.c1 + f1 * v.c)) / (1.0 - e * Jem1 * f1 * v.c1);
    o.dvarphi = o.dphi;
    if (e != 0.0)
      o.dvarphi -= e * (e - 1.0) * Jem1 / calI * o.dcalI * f0 * v.c1 + e * Jem1 * (f1 * o.dphi * v.c1 + f0 * v.c);
    return o;
  }

  std::pair<double, double> h1_vector_field(double varphi, double calI, double tau) const {
    check(calI, dom_.calI_star2, "h1_vector_field: calI below calI_**");
    const auto o = h1_point(varphi, calI, tau);
    return {o.dvarphi, o.dcalI};
  }

  // H1 = H(T^-1(varphi, calI)) + d_tau Psi.
  double H1(double varphi, double calI, double tau) const {
    const auto te = T_inverse(varphi, calI, tau);
    const double pv = f_.eval(te.phi);
    const auto v = cs_.all(tau);
    return solve_H_full(pv * v.c, te.I).H - detail::pw(calI, p_.ex.e) * fcoef_ * pv * v.c;
  }

  struct R1Parts {
    double R1, dR1_dvarphi, dR1_dcalI;
  };

  // R1 = H1 - kappa0 calI^k - f1(varphi) c1(tau) calI^b and its two partial
  // derivatives, assembled so that the leading terms cancel analytically.
  R1Parts remainder_R1_full(double varphi, double calI, double tau) const {
    check(calI, dom_.calI_star, "remainder_R1: calI below calI_*");
    const auto o = h1_point(varphi, calI, tau);
    const double e = p_.ex.e, k = p_.ex.k, b = p_.b_alpha;
    const double Je = detail::pw(calI, e);
    const double hs_z = p_.gamma * o.p0 * o.c / (p_.kappa1 * std::pow(o.u, p_.alpha));
    const double baseI = p_.kappa0 * std::pow(o.I, k);
    const double dH = baseI * std::expm1(-k * std::log1p(-hs_z));
    const double delta = -detail::pw(calI, p_.ex.em1) * fcoef_ * o.p1 * o.c1;  // (I - calI)/calI
    const double baseJ = p_.kappa0 * std::pow(calI, k);
    double pv[3];
    f_.eval_upto(varphi, 2, pv);
    const double f1v = f1coef_ * pv[1], f1dv = f1coef_ * pv[2];
    const double Jb = std::pow(calI, b);
    R1Parts r;
    r.R1 = (dH - Je * fcoef_ * o.p0 * o.c) + baseJ * std::expm1(k * std::log1p(delta)) - f1v * o.c1 * Jb;
    r.dR1_dvarphi = -o.dcalI - f1dv * o.c1 * Jb;
    r.dR1_dcalI = o.dvarphi - baseJ * k / calI - b * f1v * o.c1 * Jb / calI;
    return r;
  }

  double remainder_R1(double varphi, double calI, double tau) const {
    return remainder_R1_full(varphi, calI, tau).R1;
  }

 private:
  // x^(1/(alpha+1)).
  double root_alpha1(double x) const {
    switch (aint_) {
      case 3:
        return std::sqrt(std::sqrt(x));
      case 5:
        return std::cbrt(std::sqrt(x));
      case 7:
        return std::sqrt(std::sqrt(std::sqrt(x)));
      default:
        return std::pow(x, 1.0 / (p_.alpha + 1.0));
    }
  }

  double upow_alpha(double u) const { return aint_ > 0 ? detail::ipow(u, aint_) : std::pow(u, p_.alpha); }

  // H = u^((alpha+3)/2).
  double h_from_u(double u) const {
    if (aint_ > 0) {
      const int n2 = aint_ + 3;
      const double h = detail::ipow(u, n2 / 2);
      return n2 % 2 ? h * std::sqrt(u) : h;
    }
    return std::pow(u, 1.0 / p_.ex.a);
  }

  // Safeguarded Newton inside [lo, hi], with lo the minimum of F.
  HSolve solve_H_bracketed(double gP, double I, double rel_tol) const {
    const double k1 = p_.kappa1, ap1 = p_.alpha + 1.0;
    auto F = [&](double u, double& Fu) {
      const double ua = upow_alpha(u);
      Fu = k1 * ap1 * ua - gP;
      return k1 * ua * u - gP * u;
    };
    double lo = gP > 0.0 ? std::pow(gP / (k1 * ap1), 1.0 / p_.alpha) : 0.0;
    double hi = std::max(std::pow(2.0 * I / k1, 1.0 / ap1), std::pow(2.0 * std::abs(gP) / k1, 1.0 / p_.alpha));
    double u = std::pow(I / k1, 1.0 / ap1);
    if (!(u > lo && u < hi)) u = 0.5 * (lo + hi);
    double Fu = 0.0;
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
      const double r = F(u, Fu) - I;
      if (r > 0.0)
        hi = u;
      else
        lo = u;
      double un = u - r / Fu;
      if (!(un > lo && un < hi) || !(Fu > 0.0)) un = 0.5 * (lo + hi);
      const double du = std::abs(un - u);
      u = un;
      if (du <= rel_tol * u || hi - lo <= rel_tol * u) {
        ok = true;
        break;
      }
    }
    const double resid = F(u, Fu) - I;
    if (!ok && std::abs(resid) > 1e-12 * I)
      throw NumericError("solve_H: no convergence, residual " + std::to_string(resid / I));
    return {h_from_u(u), u, Fu, gP / (k1 * upow_alpha(u))};
  }

  static void check(double v, double lim, const char* what) {
    if (!(v >= lim)) throw DomainError(what);
  }

  double solve_q_unchecked(double varphi, double calI, double c1, double tol) const {
    const double e = p_.ex.e;
    if (e == 0.0) return 0.0;
    const double A = e * std::pow(calI, p_.ex.em1) * c1 * fcoef_;
    if (A == 0.0 || f_.is_zero()) return 0.0;
    const double lip = std::abs(A) * f_.sup_bound(1);
    if (!(lip < 1.0)) throw DomainError("solve_q: fixed-point map is not a contraction here");
    double q = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double qn = A * f_.eval(varphi + q);
      const double d = std::abs(qn - q);
      q = qn;
      if (d <= tol * std::max(1.0, std::abs(varphi)) || d == 0.0) return q;
    }
    throw NumericError("solve_q: fixed-point iteration did not converge");
  }

  // Solves c(u) sb - s(u) cb = 0 on [0, pi/2] for (cb, sb) in the first
  // quarter of the orbit (cb >= 0, sb <= 0).
  double quarter_angle(double cb, double sb) const {
    constexpr double half_pi = 0.5 * std::numbers::pi;
    auto G = [&](double u, double& dG) {
      const auto v = cs_.cs(u);
      dG = v.s * sb + odd_power(p_, v.c) * cb;
      return v.c * sb - v.s * cb;
    };
    double lo = 0.0, hi = half_pi, d;
    if (G(lo, d) >= 0.0) return 0.0;
    if (G(hi, d) <= 0.0) return half_pi;
    double u = std::atan2(-sb * std::sqrt(0.5 * (p_.alpha + 1.0)), cb);  // rough start
    u = std::clamp(u, 0.0, half_pi);
    for (int it = 0; it < 100; ++it) {
      const double g = G(u, d);
      if (g > 0.0)
        hi = u;
      else
        lo = u;
      double un = u - g / d;
      if (!(un > lo && un < hi)) un = 0.5 * (lo + hi);
      if (std::abs(un - u) <= 1e-16 || hi - lo <= 1e-16) return un;
      u = un;
    }
    return u;
  }

  const AlphaParams& p_;
  const CSTable& cs_;
  ForcingLine f_;
  Domain dom_;
  double fcoef_ = 0, f1coef_ = 0, gamma_v_ = 0;
  int aint_ = -1;
};

}  // namespace qpo
