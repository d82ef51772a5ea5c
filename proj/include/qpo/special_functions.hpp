#pragma once

// Constants of the unperturbed oscillator x'' + |x|^(alpha-1) x = 0 and the
// periodic solution pair (c, s) with c(0) = Lambda, s = c', together with the
// zero-mean antiderivative c1 of c.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "qpo/chebyshev.hpp"
#include "qpo/dop853.hpp"
#include "qpo/error.hpp"

namespace qpo {

struct Exponents {
  double a = 0;     // 2/(a+3): position scaling of r
  double br = 0;    // (a+1)/(a+3): velocity scaling of r
  double beta = 0;  // 2(a+1)/(a+3): energy as a power of r
  double k = 0;     // (a+3)/(2(a+1)): H as a power of I
  double e = 0;     // (3-a)/(2(a+1))
  double em1 = 0;   // (1-3a)/(2(a+1)) = e - 1
  double rho = 0;   // 3(1-a)/(2(a+1)): remainder decay
};

struct AlphaParams {
  double alpha = 3;
  double T1 = 0;
  double Lambda = 0;
  double gamma = 0;
  double kappa1 = 0;
  double kappa0 = 0;
  double b_alpha = 0;
  Exponents ex;
  int alpha_int = -1;  // alpha when it is an integer, else -1

  // Minimal period of the solution with amplitude lambda.
  double period(double lambda) const { return std::pow(lambda, 0.5 * (1.0 - alpha)) * T1; }
};

// Period of the solution starting at (1, 0):
// 4 * int_0^1 dx / sqrt(2/(a+1) (1 - x^(a+1))), written through the Beta function.
inline double unit_period(double alpha) {
  const double m = 1.0 / (alpha + 1.0);
  const double lbeta = std::lgamma(m) + std::lgamma(0.5) - std::lgamma(m + 0.5);
  return 4.0 * std::sqrt(0.5 * (alpha + 1.0)) * m * std::exp(lbeta);
}

inline Exponents make_exponents(double alpha) {
  Exponents x;
  const double ap1 = alpha + 1.0, ap3 = alpha + 3.0;
  x.a = 2.0 / ap3;
  x.br = ap1 / ap3;
  x.beta = 2.0 * ap1 / ap3;
  x.k = ap3 / (2.0 * ap1);
  x.e = (3.0 - alpha) / (2.0 * ap1);
  x.em1 = (1.0 - 3.0 * alpha) / (2.0 * ap1);
  x.rho = 3.0 * (1.0 - alpha) / (2.0 * ap1);
  return x;
}

inline AlphaParams derive_params(double alpha, double tol = 1e-12) {
  if (!(alpha >= 3.0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 3");
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  AlphaParams p;
  p.alpha = alpha;
  p.alpha_int = (alpha == std::floor(alpha) && alpha < 64) ? int(alpha) : -1;
  p.ex = make_exponents(alpha);
  p.T1 = unit_period(alpha);
  p.Lambda = std::pow(p.T1 / (2.0 * std::numbers::pi), 2.0 / (alpha - 1.0));
  const double resid = std::abs(p.period(p.Lambda) - 2.0 * std::numbers::pi) / (2.0 * std::numbers::pi);
  if (!(resid <= std::max(tol, 1e-14)))
    throw NumericError("period equation T(Lambda)=2pi not met, residual " + std::to_string(resid));
  p.gamma = std::pow((alpha + 3.0) / (2.0 * std::pow(p.Lambda, alpha + 1.0)), 2.0 / (alpha + 3.0));
  p.kappa1 = std::pow(p.gamma * p.Lambda, alpha + 1.0) / (alpha + 1.0);
  p.kappa0 = std::pow(p.kappa1, -(alpha + 3.0) / (2.0 * (alpha + 1.0)));
  p.b_alpha = -(3.0 * alpha * alpha - 2.0 * alpha - 9.0) / (2.0 * (alpha + 3.0) * (alpha + 1.0));
  return p;
}

// |x|^(alpha-1) x with an integer fast path.
inline double odd_power(const AlphaParams& p, double x) {
  if (p.alpha_int > 0) {
    double r = 1.0;
    const double ax = std::abs(x);
    for (int i = 1; i < p.alpha_int; ++i) r *= ax;
    return r * x;
  }
  return std::copysign(std::pow(std::abs(x), p.alpha), x);
}

// Piecewise Chebyshev representation of c, s, c1 on [0, pi/2]; everything
// else follows from c even, s odd, both anti-periodic with period pi.
class CSTable {
 public:
  struct CS {
    double c, s;
  };
  struct CSC1 {
    double c, s, c1;
  };

  static constexpr std::size_t kPanels = 8;
  static constexpr std::size_t kDegree = 24;

  static CSTable build(const AlphaParams& p, double tol = 1e-13) {
    CSTable t;
    t.init_header(p, tol);
    auto rhs = [&p](double, const ode::State<2>& y, ode::State<2>& dy) {
      dy[0] = y[1];
      dy[1] = -odd_power(p, y[0]);
    };
    ode::Options opt;
    opt.rtol = tol;
    opt.atol = tol * p.Lambda;
    opt.max_steps = 100000;
    ode::Dop853<2, decltype(rhs)> solver(rhs);
    const std::size_t m = kDegree + 1;
    t.node_c_.assign(kPanels * m, 0.0);
    t.node_s_.assign(kPanels * m, 0.0);
    ode::State<2> y{p.Lambda, 0.0};
    double now = 0.0;
    for (std::size_t q = 0; q < kPanels; ++q) {
      const auto x = cheb::lobatto_points(q * t.width_, (q + 1) * t.width_, kDegree);
      // x is descending; walk it from the left end.
      for (std::size_t j = m; j-- > 0;) {
        if (x[j] > now) {
          y = solver.integrate(now, y, x[j], opt).y;
          now = x[j];
        }
        t.node_c_[q * m + j] = y[0];
        t.node_s_[q * m + j] = y[1];
      }
    }
    t.finish();
    return t;
  }

  CS cs(double t) const {
    double sign;
    bool mirror;
    const double u = reduce(t, sign, mirror);
    const auto [q, x] = locate(u);
    const std::size_t m = kDegree + 1;
    const double c = cheb::clenshaw(&cc_[q * m], m, x);
    const double s = cheb::clenshaw(&sc_[q * m], m, x);
    return {sign * (mirror ? -c : c), sign * s};
  }

  double c1(double t) const {
    double sign;
    bool mirror;
    const double u = reduce(t, sign, mirror);
    const auto [q, x] = locate(u);
    return sign * (cheb::clenshaw(&c1c_[q * (kDegree + 2)], kDegree + 2, x) + c1_offset_[q]);
  }

  // c, s and c1 together: one fused Clenshaw pass over interleaved,
  // tail-trimmed coefficients.
  CSC1 all(double t) const {
    double sign;
    bool mirror;
    const double u = reduce(t, sign, mirror);
    const auto [q, x] = locate(u);
    const double* c3 = &fused_[q * (kDegree + 2) * 3];
    double p1 = 0, p2 = 0, q1 = 0, q2 = 0, r1 = 0, r2 = 0;
    const double x2 = 2.0 * x;
    for (std::size_t k = fused_len_[q]; k-- > 1;) {
      const double* ck = c3 + 3 * k;
      const double p0 = ck[0] + x2 * p1 - p2, q0 = ck[1] + x2 * q1 - q2, r0 = ck[2] + x2 * r1 - r2;
      p2 = p1;
      p1 = p0;
      q2 = q1;
      q1 = q0;
      r2 = r1;
      r1 = r0;
    }
    const double c = c3[0] + x * p1 - p2;
    const double s = c3[1] + x * q1 - q2;
    const double c1 = c3[2] + x * r1 - r2 + c1_offset_[q];
    return {sign * (mirror ? -c : c), sign * s, sign * c1};
  }

  double alpha() const { return alpha_; }
  double build_tol() const { return tol_; }
  // Largest energy-identity residual seen on a fine check grid, relative to Lambda^(alpha+1).
  double achieved_tol() const { return achieved_; }
  double c_sup() const { return c_sup_; }
  double s_sup() const { return s_sup_; }
  double c1_sup() const { return c1_sup_; }
  std::size_t node_count() const { return node_c_.size(); }

  void save(const std::filesystem::path& file) const {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write table cache " + file.string());
    os.write(kMagic, 8);
    put(os, std::bit_cast<std::uint64_t>(alpha_));
    put(os, std::bit_cast<std::uint64_t>(tol_));
    put(os, std::uint64_t(kPanels));
    put(os, std::uint64_t(kDegree));
    put(os, std::uint64_t(node_c_.size()));
    for (double v : node_c_) put(os, std::bit_cast<std::uint64_t>(v));
    for (double v : node_s_) put(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw Error("short write on table cache " + file.string());
  }

  // Returns false when the file is absent or was written for other inputs.
  static bool load(const std::filesystem::path& file, const AlphaParams& p, double tol, CSTable& out) {
    std::ifstream is(file, std::ios::binary);
    if (!is) return false;
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kMagic, 8)) return false;
    std::uint64_t a, tl, np, deg, n;
    if (!get(is, a) || !get(is, tl) || !get(is, np) || !get(is, deg) || !get(is, n)) return false;
    if (std::bit_cast<double>(a) != p.alpha || std::bit_cast<double>(tl) != tol || np != kPanels ||
        deg != kDegree || n != kPanels * (kDegree + 1))
      return false;
    CSTable t;
    t.init_header(p, tol);
    t.node_c_.resize(n);
    t.node_s_.resize(n);
    for (auto& v : t.node_c_) {
      std::uint64_t b;
      if (!get(is, b)) return false;
      v = std::bit_cast<double>(b);
    }
    for (auto& v : t.node_s_) {
      std::uint64_t b;
      if (!get(is, b)) return false;
      v = std::bit_cast<double>(b);
    }
    t.finish();
    out = std::move(t);
    return true;
  }

  static std::filesystem::path cache_file(const std::filesystem::path& dir, double alpha, double tol) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "cs_%016llx_%016llx.bin",
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(alpha)),
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(tol)));
    return dir / buf;
  }

  static CSTable load_or_build(const AlphaParams& p, double tol, const std::filesystem::path& cache_dir) {
    if (cache_dir.empty()) return build(p, tol);
    const auto file = cache_file(cache_dir, p.alpha, tol);
    CSTable t;
    if (load(file, p, tol, t)) return t;
    t = build(p, tol);
    std::filesystem::create_directories(cache_dir);
    t.save(file);
    return t;
  }

 private:
  static constexpr char kMagic[8] = {'Q', 'P', 'O', 'C', 'S', 'T', 'B', '1'};

  static void put(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static bool get(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return true;
  }

  void init_header(const AlphaParams& p, double tol) {
    alpha_ = p.alpha;
    Lambda_ = p.Lambda;
    tol_ = tol;
    width_ = 0.5 * std::numbers::pi / double(kPanels);
    inv_width_ = 1.0 / width_;
  }

  void finish() {
    const std::size_t m = kDegree + 1;
    cc_.assign(kPanels * m, 0.0);
    sc_.assign(kPanels * m, 0.0);
    c1c_.assign(kPanels * (m + 1), 0.0);
    c1_offset_.assign(kPanels, 0.0);
    double offset = 0.0;
    for (std::size_t q = 0; q < kPanels; ++q) {
      std::vector<double> vc(node_c_.begin() + q * m, node_c_.begin() + (q + 1) * m);
      std::vector<double> vs(node_s_.begin() + q * m, node_s_.begin() + (q + 1) * m);
      const auto cc = cheb::fit_lobatto(vc);
      const auto sc = cheb::fit_lobatto(vs);
      const auto ic = cheb::integrate(cc, 0.5 * width_);
      std::copy(cc.begin(), cc.end(), cc_.begin() + q * m);
      std::copy(sc.begin(), sc.end(), sc_.begin() + q * m);
      std::copy(ic.begin(), ic.end(), c1c_.begin() + q * (m + 1));
      c1_offset_[q] = offset;
      offset += cheb::clenshaw(ic.data(), ic.size(), 1.0);
    }
    // Interleaved copy for all(). Fitted coefficients flatten out at the
    // rounding floor (a few 1e-16) well before kDegree; the tail below 2e-15
    // of the function scale is noise and is dropped.
    const std::size_t M = m + 1;
    fused_.assign(kPanels * M * 3, 0.0);
    fused_len_.assign(kPanels, 1);
    const double drop = 2e-15 * std::max(1.0, Lambda_);
    for (std::size_t q = 0; q < kPanels; ++q) {
      for (std::size_t k = 0; k < M; ++k) {
        const double a = k < m ? cc_[q * m + k] : 0.0, b = k < m ? sc_[q * m + k] : 0.0, c = c1c_[q * M + k];
        fused_[(q * M + k) * 3 + 0] = a;
        fused_[(q * M + k) * 3 + 1] = b;
        fused_[(q * M + k) * 3 + 2] = c;
        if (std::abs(a) > drop || std::abs(b) > drop || std::abs(c) > drop) fused_len_[q] = k + 1;
      }
    }
    c_sup_ = Lambda_;
    s_sup_ = std::abs(cs(0.5 * std::numbers::pi).s);
    c1_sup_ = std::abs(c1(0.5 * std::numbers::pi));
    const double e0 = std::pow(Lambda_, alpha_ + 1.0);
    achieved_ = 0.0;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const auto v = cs(0.5 * std::numbers::pi * i / n);
      const double e = 0.5 * v.s * v.s + std::pow(std::abs(v.c), alpha_ + 1.0) / (alpha_ + 1.0);
      achieved_ = std::max(achieved_, std::abs(e - e0 / (alpha_ + 1.0)) / e0);
    }
  }

  // Maps t to u in [0, pi/2] with value(t) = sign * (mirror ? -c : c, s, c1)(u).
  static double reduce(double t, double& sign, bool& mirror) {
    constexpr double pi = std::numbers::pi;
    const double turns = std::floor(t * (1.0 / pi));
    double u = std::fma(-turns, pi, t);
    if (u < 0.0) u = 0.0;
    if (u > pi) u = pi;
    sign = (static_cast<long long>(turns) & 1) ? -1.0 : 1.0;
    mirror = u > 0.5 * pi;
    if (mirror) u = pi - u;
    return u;
  }

  std::pair<std::size_t, double> locate(double u) const {
    std::size_t q = static_cast<std::size_t>(u * inv_width_);
    if (q >= kPanels) q = kPanels - 1;
    const double x = 2.0 * (u - double(q) * width_) * inv_width_ - 1.0;
    return {q, x};
  }

  double alpha_ = 3, Lambda_ = 1, tol_ = 0, width_ = 0, inv_width_ = 0;
  double achieved_ = 0, c_sup_ = 0, s_sup_ = 0, c1_sup_ = 0;
  std::vector<double> node_c_, node_s_;
  std::vector<double> cc_, sc_, c1c_, c1_offset_;
  std::vector<double> fused_;
  std::vector<std::size_t> fused_len_;
};

// Constants plus tables, the unit every other module consumes.
struct Oscillator {
  AlphaParams p;
  CSTable table;

  static Oscillator make(double alpha, double tol = 1e-13, const std::filesystem::path& cache_dir = {}) {
    Oscillator o;
    o.p = derive_params(alpha, 1e-12);
    o.table = CSTable::load_or_build(o.p, tol, cache_dir);
    return o;
  }
};

inline CSTable::CS eval_cs(const AlphaParams&, const CSTable& table, double t) { return table.cs(t); }
inline double eval_c1(const AlphaParams&, const CSTable& table, double t) { return table.c1(t); }

}  // namespace qpo
