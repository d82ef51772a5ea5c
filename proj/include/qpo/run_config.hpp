#pragma once

// Flat key-value run configuration.
//
//   # comment
//   alpha 3
//   omega 1,1.4142135623730951
//   term 1,0 0.1 0        (index vector, cosine coefficient, sine coefficient)
//   term 0,1 0 0.05
//
// Without `omega` or `term` lines the default forcing 0.1 cos 2 pi th1 +
// 0.05 sin 2 pi th2 with omega = (1, sqrt 2) is used; once either appears the
// forcing is exactly what the file lists, so `omega 1` alone means p = 0.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qpo/error.hpp"
#include "qpo/forcing.hpp"
#include "qpo/successor.hpp"

namespace qpo {

struct RunConfig {
  double alpha = 3.0;
  std::vector<double> omega{1.0, std::sqrt(2.0)};
  std::vector<ForcingTerm> terms{{{1, 0}, 0.1, 0.0}, {{0, 1}, 0.0, 0.05}};
  std::vector<double> theta;  // empty: origin of the torus
  double safety = 2.0;

  double tol = 1e-10;         // integrator tolerance of the transformed route
  double direct_tol = 1e-12;  // integrator tolerance of the Cartesian route

  // orbit and successor
  double calI0 = 1e4, varphi0 = 0.0;
  double v0 = std::numeric_limits<double>::quiet_NaN(), t0 = 0.0;  // v0 set: start from a zero of x
  int n_max = 1000;

  // ensemble
  int n_theta = 64, n_orbits = 256;
  double calI_lo = 1e4, calI_hi = 1e5;
  double growth_factor = 4.0, delta = 0.05;
  int burn_in = 100;
  int gap_samples = 64;
  std::vector<double> gap_levels{1e3, 1e4, 1e5, 1e6, 1e7};
  int det_checks = 30;
  bool ensemble_all_rows = false;

  std::uint64_t seed = 42;
  unsigned threads = 0;

  // verify
  int verify_samples = 16;
  double tamper_kappa1 = 0.0;  // relative perturbation of kappa1, negative control only

  TorusForcing forcing() const { return TorusForcing(omega, terms); }

  TorusPoint theta_point() const {
    return theta.empty() ? TorusPoint(std::vector<double>(omega.size(), 0.0)) : TorusPoint(theta);
  }

  OrbitPolicy policy(bool record) const { return {growth_factor, delta, burn_in, record}; }

  EnsembleConfig ensemble() const {
    EnsembleConfig e;
    e.n_theta = n_theta;
    e.n_orbits = n_orbits;
    e.n_max = n_max;
    e.calI_lo = calI_lo;
    e.calI_hi = calI_hi;
    e.seed = seed;
    e.threads = threads;
    e.policy = policy(ensemble_all_rows);
    e.gap_samples = gap_samples;
    e.gap_levels = gap_levels;
    e.det_checks = det_checks;
    return e;
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct FieldParser {
  int line;
  std::string key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line) + ", " + key + ": " + what);
  }

  double real(const std::string& s) const {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) fail("'" + s + "' is not a finite number");
    return v;
  }

  long long integer(const std::string& s) const {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) fail("'" + s + "' is not an integer");
    return v;
  }

  std::uint64_t u64(const std::string& s) const {
    char* end = nullptr;
    if (s.empty() || s[0] == '-') fail("'" + s + "' is not an unsigned integer");
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) fail("'" + s + "' is not an unsigned integer");
    return v;
  }

  std::vector<double> reals(const std::string& s) const {
    std::vector<double> v;
    for (const auto& x : split(s, ',')) v.push_back(real(x));
    return v;
  }

  double positive(const std::string& s) const {
    const double v = real(s);
    if (!(v > 0)) fail("must be positive");
    return v;
  }

  int count(const std::string& s, int lo) const {
    const long long v = integer(s);
    if (v < lo || v > 100000000) fail("must be an integer in [" + std::to_string(lo) + ", 1e8]");
    return int(v);
  }
};

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::set<std::string> seen;
  bool forcing_given = false;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> args;
    for (std::string a; ls >> a;) args.push_back(a);
    const detail::FieldParser f{lineno, key};
    if (key != "term" && !seen.insert(key).second) f.fail("given more than once");
    auto one = [&]() -> const std::string& {
      if (args.size() != 1) f.fail("expects exactly one value");
      return args[0];
    };
    if (!forcing_given && (key == "omega" || key == "term")) {
      forcing_given = true;
      c.omega.clear();
      c.terms.clear();
    }

    if (key == "alpha") {
      c.alpha = f.real(one());
      if (!(c.alpha >= 3.0)) f.fail("alpha must be >= 3");
    } else if (key == "omega") {
      c.omega = f.reals(one());
      for (double w : c.omega)
        if (!(w > 0)) f.fail("frequencies must be positive");
    } else if (key == "theta") {
      c.theta = f.reals(one());
    } else if (key == "term") {
      if (args.size() != 3) f.fail("expects 'term k1,...,kN a b'");
      ForcingTerm t;
      for (const auto& k : detail::split(args[0], ',')) {
        const long long v = f.integer(k);
        if (std::abs(v) > 1000) f.fail("index entries must be within [-1000, 1000]");
        t.k.push_back(int(v));
      }
      t.a = f.real(args[1]);
      t.b = f.real(args[2]);
      c.terms.push_back(std::move(t));
    } else if (key == "safety") {
      c.safety = f.real(one());
      if (!(c.safety >= 1.0)) f.fail("must be >= 1");
    } else if (key == "tol") {
      c.tol = f.positive(one());
      if (c.tol > 1e-4) f.fail("must be <= 1e-4");
    } else if (key == "direct_tol") {
      c.direct_tol = f.positive(one());
      if (c.direct_tol > 1e-4) f.fail("must be <= 1e-4");
    } else if (key == "calI0") {
      c.calI0 = f.positive(one());
    } else if (key == "varphi0") {
      c.varphi0 = f.real(one());
    } else if (key == "v0") {
      c.v0 = f.real(one());
      if (!(c.v0 < 0)) f.fail("must be negative");
    } else if (key == "t0") {
      c.t0 = f.real(one());
    } else if (key == "n_max") {
      c.n_max = f.count(one(), 1);
    } else if (key == "n_theta") {
      c.n_theta = f.count(one(), 1);
    } else if (key == "n_orbits") {
      c.n_orbits = f.count(one(), 1);
    } else if (key == "calI_lo") {
      c.calI_lo = f.positive(one());
    } else if (key == "calI_hi") {
      c.calI_hi = f.positive(one());
    } else if (key == "growth_factor") {
      c.growth_factor = f.real(one());
      if (!(c.growth_factor > 1)) f.fail("must be > 1");
    } else if (key == "delta") {
      c.delta = f.positive(one());
    } else if (key == "burn_in") {
      c.burn_in = f.count(one(), 0);
    } else if (key == "gap_samples") {
      c.gap_samples = f.count(one(), 0);
    } else if (key == "gap_levels") {
      c.gap_levels = f.reals(one());
      for (double l : c.gap_levels)
        if (!(l > 0)) f.fail("levels must be positive");
    } else if (key == "det_checks") {
      c.det_checks = f.count(one(), 0);
    } else if (key == "ensemble_rows") {
      const auto& v = one();
      if (v != "summary" && v != "all") f.fail("must be 'summary' or 'all'");
      c.ensemble_all_rows = v == "all";
    } else if (key == "seed") {
      c.seed = f.u64(one());
    } else if (key == "threads") {
      c.threads = unsigned(f.count(one(), 0));
    } else if (key == "verify_samples") {
      c.verify_samples = f.count(one(), 4);
    } else if (key == "tamper_kappa1") {
      c.tamper_kappa1 = f.real(one());
    } else {
      f.fail("unknown key");
    }
  }
  if (c.omega.empty()) throw ConfigError("omega: at least one frequency is required when terms are given");
  for (const auto& t : c.terms)
    if (t.k.size() != c.omega.size())
      throw ConfigError("term: index has " + std::to_string(t.k.size()) + " entries, omega has " +
                        std::to_string(c.omega.size()));
  if (!c.theta.empty() && c.theta.size() != c.omega.size())
    throw ConfigError("theta: has " + std::to_string(c.theta.size()) + " entries, omega has " +
                      std::to_string(c.omega.size()));
  if (c.calI_hi < c.calI_lo) throw ConfigError("calI_hi must be >= calI_lo");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

}  // namespace qpo
