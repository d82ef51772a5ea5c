#pragma once

// Quasi-periodic forcing p_Theta(t) = P(Theta + t*omega) for a real
// trigonometric polynomial P on the N-torus.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qpo/error.hpp"

namespace qpo {

inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

struct TorusPoint {
  std::vector<double> coords;

  TorusPoint() = default;
  explicit TorusPoint(std::vector<double> c) : coords(std::move(c)) {
    for (double& v : coords) v = wrap01(v);
  }
  std::size_t dim() const { return coords.size(); }

  friend TorusPoint operator+(const TorusPoint& a, const TorusPoint& b) {
    if (a.dim() != b.dim()) throw DomainError("torus dimension mismatch");
    std::vector<double> c(a.dim());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coords[i] + b.coords[i];
    return TorusPoint(std::move(c));
  }
};

inline TorusPoint iota(const std::vector<double>& omega, double t) {
  std::vector<double> c(omega.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = t * omega[i];
  return TorusPoint(std::move(c));
}

struct ForcingTerm {
  std::vector<int> k;
  double a = 0;  // cosine coefficient
  double b = 0;  // sine coefficient
};

// p_Theta restricted to one phase: sum a cos(2 pi (x0 + w t)) + b sin(...).
// Precomputing x0 = k.Theta and w = k.omega keeps the hot path free of the
// torus dimension.
class ForcingLine {
 public:
  struct Mode {
    double x0, w, W, a, b;  // W = 2 pi w
  };

  explicit ForcingLine(std::vector<Mode> modes) : modes_(std::move(modes)) {}
  ForcingLine() = default;

  // Derivatives of orders 0..max_order (max_order <= 4) written to out.
  void eval_upto(double t, int max_order, double* out) const {
    for (int n = 0; n <= max_order; ++n) out[n] = 0.0;
    for (const Mode& m : modes_) {
      const double ph = 2.0 * std::numbers::pi * wrap01(m.x0 + wrap01(m.w * t));
      const double C = std::cos(ph), S = std::sin(ph);
      const double even = m.a * C + m.b * S, odd = m.b * C - m.a * S;
      double Wn = 1.0;
      for (int n = 0; n <= max_order; ++n) {
        // d^n/dt^n rotates the phase by n * pi / 2.
        const double v = (n % 2 == 0) ? even : odd;
        out[n] += ((n / 2) % 2 == 0 ? 1.0 : -1.0) * Wn * v;
        Wn *= m.W;
      }
    }
  }

  double eval(double t, int order = 0) const {
    if (order < 0 || order > 4) throw DomainError("forcing derivative order must be in 0..4");
    double out[5];
    eval_upto(t, order, out);
    return out[order];
  }

  // sup over t of |d^n p/dt^n| bounded by sum (|a|+|b|) |2 pi k.omega|^n.
  double sup_bound(int order) const {
    double s = 0.0;
    for (const Mode& m : modes_) s += (std::abs(m.a) + std::abs(m.b)) * std::pow(std::abs(m.W), order);
    return s;
  }

  bool is_zero() const { return modes_.empty(); }
  const std::vector<Mode>& modes() const { return modes_; }

 private:
  std::vector<Mode> modes_;
};

class TorusForcing {
 public:
  TorusForcing() = default;
  TorusForcing(std::vector<double> omega, std::vector<ForcingTerm> terms)
      : omega_(std::move(omega)), terms_(std::move(terms)) {
    if (omega_.empty()) throw DomainError("forcing needs at least one frequency");
    for (double w : omega_)
      if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("frequencies must be positive and finite");
    for (const auto& t : terms_) {
      if (t.k.size() != omega_.size())
        throw DomainError("term index has " + std::to_string(t.k.size()) + " entries, expected " +
                          std::to_string(omega_.size()));
      if (!std::isfinite(t.a) || !std::isfinite(t.b)) throw DomainError("forcing coefficients must be finite");
    }
  }

  std::size_t dim() const { return omega_.size(); }
  const std::vector<double>& omega() const { return omega_; }
  const std::vector<ForcingTerm>& terms() const { return terms_; }

  int max_degree() const {
    int d = 0;
    for (const auto& t : terms_) {
      int s = 0;
      for (int v : t.k) s += std::abs(v);
      d = std::max(d, s);
    }
    return d;
  }

  bool is_zero() const {
    for (const auto& t : terms_)
      if (t.a != 0.0 || t.b != 0.0) return false;
    return true;
  }

  // P(Theta) on the torus.
  double eval_torus(const TorusPoint& theta) const {
    check_dim(theta);
    double s = 0.0;
    for (const auto& t : terms_) {
      double x = 0.0;
      for (std::size_t i = 0; i < t.k.size(); ++i) x += t.k[i] * theta.coords[i];
      const double ph = 2.0 * std::numbers::pi * wrap01(x);
      s += t.a * std::cos(ph) + t.b * std::sin(ph);
    }
    return s;
  }

  ForcingLine line(const TorusPoint& theta) const {
    check_dim(theta);
    std::vector<ForcingLine::Mode> modes;
    for (const auto& t : terms_) {
      if (t.a == 0.0 && t.b == 0.0) continue;
      double x0 = 0.0, w = 0.0;
      for (std::size_t i = 0; i < t.k.size(); ++i) {
        x0 += t.k[i] * theta.coords[i];
        w += t.k[i] * omega_[i];
      }
      modes.push_back({wrap01(x0), w, 2.0 * std::numbers::pi * w, t.a, t.b});
    }
    return ForcingLine(std::move(modes));
  }

  // d^order/dt^order p_Theta(t).
  double eval_p(const TorusPoint& theta, double t, int order) const {
    if (order < 0 || order > 4) throw DomainError("forcing derivative order must be in 0..4");
    return line(theta).eval(t, order);
  }

  // Upper bound for the C^4 norm of P on the torus.
  double c4_norm_bound() const {
    double s = 0.0;
    for (const auto& t : terms_) {
      int l1 = 0;
      for (int v : t.k) l1 += std::abs(v);
      s += (std::abs(t.a) + std::abs(t.b)) * std::max(1.0, std::pow(2.0 * std::numbers::pi * l1, 4));
    }
    return s;
  }

  // Upper bound for the C^4_b norm of p_Theta on the real line, any Theta.
  double c4_line_bound() const {
    double wmax = 0.0;
    for (double w : omega_) wmax = std::max(wmax, std::abs(w));
    return std::max(1.0, std::pow(wmax, 4)) * c4_norm_bound();
  }

  TorusForcing scaled(double factor) const {
    auto t = terms_;
    for (auto& x : t) {
      x.a *= factor;
      x.b *= factor;
    }
    return TorusForcing(omega_, std::move(t));
  }

 private:
  void check_dim(const TorusPoint& theta) const {
    if (theta.dim() != omega_.size()) throw DomainError("torus point has wrong dimension");
  }

  std::vector<double> omega_;
  std::vector<ForcingTerm> terms_;
};

}  // namespace qpo
