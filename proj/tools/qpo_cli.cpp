// qpo: constants, checks, orbits and ensembles for x'' + |x|^(a-1) x = p(t).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qpo/direct_flow.hpp"
#include "qpo/fit.hpp"
#include "qpo/run_config.hpp"
#include "qpo/successor.hpp"

namespace {

using nlohmann::ordered_json;
using json = ordered_json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;
constexpr double kPi = std::numbers::pi;

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumeric = 3 };

class IoError : public qpo::Error {
 public:
  using Error::Error;
};

struct Env {
  qpo::RunConfig cfg;
  qpo::Oscillator osc;
  qpo::TorusForcing forcing;
  qpo::Thresholds T;

  explicit Env(const qpo::RunConfig& c)
      : cfg(c),
        osc(qpo::Oscillator::make(c.alpha)),
        forcing(c.forcing()),
        T(qpo::compute_thresholds(osc, forcing, {.safety = c.safety})) {}

  qpo::SuccessorContext ctx(double tol) const { return {osc, forcing, T, {tol}}; }
};

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json config_json(const qpo::RunConfig& c) {
  json terms = json::array();
  for (const auto& t : c.terms) terms.push_back({{"k", t.k}, {"a", t.a}, {"b", t.b}});
  return {{"alpha", c.alpha},
          {"omega", c.omega},
          {"terms", terms},
          {"theta", c.theta_point().coords},
          {"safety", c.safety},
          {"tol", c.tol},
          {"direct_tol", c.direct_tol},
          {"calI0", c.calI0},
          {"varphi0", c.varphi0},
          {"v0", std::isnan(c.v0) ? json(nullptr) : json(c.v0)},
          {"t0", c.t0},
          {"n_max", c.n_max},
          {"n_theta", c.n_theta},
          {"n_orbits", c.n_orbits},
          {"calI_lo", c.calI_lo},
          {"calI_hi", c.calI_hi},
          {"growth_factor", c.growth_factor},
          {"delta", c.delta},
          {"burn_in", c.burn_in},
          {"gap_samples", c.gap_samples},
          {"gap_levels", c.gap_levels},
          {"det_checks", c.det_checks},
          {"ensemble_rows", c.ensemble_all_rows ? "all" : "summary"},
          {"seed", c.seed},
          {"verify_samples", c.verify_samples},
          {"tamper_kappa1", c.tamper_kappa1}};
}

json fit_json(const qpo::LineFit& f) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {{"slope", num(f.slope)}, {"intercept", num(f.intercept)}, {"slope_se", num(f.slope_se)}, {"points", f.n}};
}

json report_header(const char* command, const qpo::RunConfig& c) {
  return {{"schema_version", kSchemaVersion}, {"command", command}, {"config", config_json(c)}};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw IoError("write to " + path.string() + " failed");
}

void emit(const json& report, const std::optional<fs::path>& out, const std::string& name) {
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (out) write_file(*out / name, text);
}

fs::path require_out(const std::optional<fs::path>& out, const char* command) {
  if (!out) throw qpo::ConfigError(std::string(command) + " writes files and needs --out DIR");
  return *out;
}

// params

json params_json(const Env& e) {
  const auto& p = e.osc.p;
  const double a = p.alpha;
  json r;
  r["params"] = {{"alpha", a},          {"T1", p.T1},         {"Lambda", p.Lambda},   {"gamma", p.gamma},
                 {"kappa1", p.kappa1},  {"kappa0", p.kappa0}, {"b_alpha", p.b_alpha}, {"rho", p.ex.rho},
                 {"k", p.ex.k},         {"e", p.ex.e}};
  r["identities"] = {
      {"period T(Lambda) = 2 pi", std::abs(p.period(p.Lambda) / (2 * kPi) - 1.0)},
      {"gamma^((a+3)/2) (2/(a+3)) Lambda^(a+1) = 1",
       std::abs(std::pow(p.gamma, 0.5 * (a + 3)) * (2 / (a + 3)) * std::pow(p.Lambda, a + 1) - 1.0)},
      {"kappa1 = (gamma Lambda)^(a+1)/(a+1)",
       std::abs(p.kappa1 / (std::pow(p.gamma * p.Lambda, a + 1) / (a + 1)) - 1.0)},
      {"kappa0 = kappa1^(-(a+3)/(2(a+1)))", std::abs(p.kappa0 / std::pow(p.kappa1, -p.ex.k) - 1.0)},
      {"table energy identity", e.osc.table.achieved_tol()}};
  const auto& T = e.T;
  r["thresholds"] = {{"safety", T.safety},
                     {"r_star", T.r_star},
                     {"I_star", T.I_star},
                     {"I_C0", T.I_C0},
                     {"C0", T.C0},
                     {"I_star2", T.I_star2},
                     {"calI_star", T.calI_star},
                     {"calI_star2", T.calI_star2},
                     {"C0_tilde", T.C0_tilde},
                     {"calI_top", T.calI_top},
                     {"v_star", T.v_star},
                     {"alpha0", T.alpha0},
                     {"beta0", T.beta0},
                     {"C", T.C},
                     {"sup_p", {T.P0, T.P1, T.P2}},
                     {"adiabatic_rate", T.adiabatic_rate},
                     {"q_hypothesis", T.q_hypothesis}};
  return r;
}

int cmd_params(const qpo::RunConfig& c, const std::optional<fs::path>& out) {
  const Env e(c);
  json r = report_header("params", c);
  r.update(params_json(e));
  emit(r, out, "params.json");
  return kOk;
}

// verify

struct Check {
  std::string name;
  std::string status;  // pass, fail, skipped, reported
  double value = 0, limit = 0;
  std::string detail;
};

class Battery {
 public:
  void run(const std::string& name, const std::function<Check()>& f) {
    Check c;
    try {
      c = f();
    } catch (const std::exception& ex) {
      c.status = "fail";
      c.detail = std::string("exception: ") + ex.what();
    }
    c.name = name;
    checks_.push_back(c);
  }
  static Check bound(double value, double limit, std::string detail = {}) {
    return {"", value <= limit ? "pass" : "fail", value, limit, std::move(detail)};
  }
  static Check skipped(std::string why) { return {"", "skipped", 0, 0, std::move(why)}; }
  static Check reported(double value, std::string detail) { return {"", "reported", value, 0, std::move(detail)}; }

  bool ok() const {
    for (const auto& c : checks_)
      if (c.status == "fail") return false;
    return true;
  }
  json to_json() const {
    json a = json::array();
    for (const auto& c : checks_)
      a.push_back({{"name", c.name}, {"status", c.status}, {"value", c.value}, {"limit", c.limit}, {"detail", c.detail}});
    return a;
  }

 private:
  std::vector<Check> checks_;
};

std::vector<double> decade_levels(double lo, double hi) {
  std::vector<double> v;
  for (double l = std::pow(10.0, std::ceil(std::log10(lo))); l <= hi * (1 + 1e-12); l *= 10) v.push_back(l);
  return v;
}

int cmd_verify(const qpo::RunConfig& c, const std::optional<fs::path>& out) {
  const Env e(c);
  const auto& p = e.osc.p;
  const double a = p.alpha;
  const int n = c.verify_samples;
  const bool zero = e.forcing.is_zero();
  const std::uint64_t seed = c.seed;
  long sandwich_checks = 0, sandwich_bad = 0;
  auto model = [&](const qpo::TorusPoint& th) {
    qpo::Model m(e.osc, e.forcing.line(th));
    m.set_domain(e.T.domain());
    return m;
  };
  auto random_theta = [&](qpo::SplitMix64& g) {
    std::vector<double> v(e.forcing.dim());
    for (auto& x : v) x = g.uniform();
    return qpo::TorusPoint(v);
  };
  Battery b;

  b.run("period and constant identities", [&] {
    const double r1 = std::abs(p.period(p.Lambda) / (2 * kPi) - 1.0);
    const double r2 = std::abs(std::pow(p.gamma, 0.5 * (a + 3)) * (2 / (a + 3)) * std::pow(p.Lambda, a + 1) - 1.0);
    const double r3 = std::abs(p.kappa0 / std::pow(p.kappa1, -p.ex.k) - 1.0);
    return Battery::bound(std::max({r1, r2, r3}), 1e-12);
  });
  b.run("energy-action identity", [&] {
    // kappa1 r^beta against the Cartesian energy of eta(theta, r).
    const double kappa1 = p.kappa1 * (1.0 + c.tamper_kappa1);
    const qpo::Model m(e.osc, qpo::ForcingLine());
    double worst = 0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 8; ++j) {
        const double th = 2 * kPi * (i + 0.3) / 16, r = std::pow(10.0, -1 + j);
        const auto [x, v] = m.from_action_angle(th, r);
        const double E = qpo::energy(p, x, v);
        worst = std::max(worst, std::abs(kappa1 * std::pow(r, p.ex.beta) / E - 1.0));
      }
    return Battery::bound(worst, 1e-9, c.tamper_kappa1 != 0 ? "kappa1 tampered" : "");
  });
  b.run("table energy identity", [&] {
    const double scale = std::pow(p.Lambda, a + 1);
    double worst = 0;
    for (int i = 0; i < 2000; ++i) {
      const auto v = e.osc.table.cs(-10.0 + 20.0 * i / 1999.0);
      worst = std::max(worst, std::abs(0.5 * v.s * v.s + std::pow(std::abs(v.c), a + 1) / (a + 1) - scale / (a + 1)));
    }
    return Battery::bound(worst / scale, 1e-9);
  });
  b.run("action-angle map symplectic", [&] {
    const qpo::Model m(e.osc, qpo::ForcingLine());
    double worst = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const double th = 2 * kPi * (i + 0.5) / 8, r = std::pow(10.0, -1 + 5.0 * j / 7);
        const auto J = qpo::fd_jacobian(
            [&](double x, double y) {
              const auto [u, v] = m.from_action_angle(x, y);
              return std::array<double, 2>{u, v};
            },
            th, r, 1e-4, 1e-4 * r);
        worst = std::max(worst, std::abs(J[0] * J[3] - J[1] * J[2] - 1.0));
      }
    return Battery::bound(worst, 1e-6);
  });
  b.run("implicit Hamiltonian residual", [&] {
    qpo::SplitMix64 g(seed, 11, 0);
    double worst = 0;
    const double lo = std::max(e.T.I_star * 1.01, 1e2);
    for (int i = 0; i < 50 * n; ++i) {
      const auto m = model(random_theta(g));
      const double phi = 10 * g.uniform(), tau = 2 * kPi * g.uniform(), I = lo * std::pow(1e7 / lo, g.uniform());
      worst = std::max(worst, std::abs(m.implicit_residual(phi, I, tau, m.solve_H(phi, I, tau))) / I);
    }
    return Battery::bound(worst, 1e-10);
  });
  b.run("remainder slope", [&] {
    if (zero) return Battery::skipped("zero forcing");
    const auto levels = decade_levels(std::max(2 * e.T.I_C0, 1e3), 1e7);
    if (levels.size() < 3) return Battery::skipped("fewer than three decades above I_C0");
    const auto m = model(c.theta_point());
    std::vector<double> sup;
    for (double I : levels) {
      double s = 0;
      for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) s = std::max(s, std::abs(m.remainder_R(2 * kPi * i / 32, I, 2 * kPi * j / 32)));
      sup.push_back(s);
    }
    // The second-order coefficient of R carries a factor (5 - a), so at a = 5
    // the third-order term leads.
    const double target = a == 5.0 ? p.ex.k * (1 - 6 * a / (a + 3)) : p.ex.rho;
    const auto f = qpo::fit_loglog(levels, sup);
    return Battery::bound(std::abs(f.slope - target), 0.1, "slope " + g17(f.slope) + ", target " + g17(target));
  });
  b.run("canonical transform symplectic", [&] {
    qpo::SplitMix64 g(seed, 12, 0);
    const double lo = 2 * std::max(e.T.I_star2, e.T.calI_star2);
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      const auto m = model(random_theta(g));
      const double phi = 2 * kPi * g.uniform(), tau = 2 * kPi * g.uniform(), I = lo * std::pow(1e3, g.uniform());
      const auto J = qpo::fd_jacobian(
          [&](double x, double y) {
            const auto s = m.T_forward(x, y, tau);
            ++sandwich_checks;
            if (!(y / 2 <= s.calI && s.calI <= 2 * y)) ++sandwich_bad;
            return std::array<double, 2>{s.varphi - x, s.calI - y};
          },
          phi, I, 1e-4, 1e-4 * I);
      worst = std::max(worst, std::abs((1 + J[0]) * (1 + J[3]) - J[1] * J[2] - 1.0));
    }
    return Battery::bound(worst, 1e-6);
  });
  b.run("successor map area preserving", [&] {
    qpo::SplitMix64 g(seed, 13, 0);
    const auto ctx = e.ctx(1e-12);
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      const auto m = ctx.model(random_theta(g));
      const qpo::SuccessorPoint pt{2 * kPi * g.uniform(), 2 * e.T.calI_top * std::pow(100.0, g.uniform())};
      const auto r = qpo::poincare_Phi(m, pt, e.T.calI_top, ctx.phi);
      ++sandwich_checks;
      if (r.min_ratio < 0.25 || r.max_ratio > 4) ++sandwich_bad;
      worst = std::max(worst, std::abs(qpo::det_Phi(m, pt, e.T.calI_top, ctx.phi) - 1.0));
    }
    return Battery::bound(worst, 1e-5);
  });
  b.run("successor cross-route agreement", [&] {
    qpo::SplitMix64 g(seed, 14, 0);
    const auto ctx = e.ctx(std::min(c.tol, 1e-11));
    double worst = 0;
    for (int i = 0; i < n; ++i) {
      const auto m = ctx.model(random_theta(g));
      const double v0 = e.T.v_star * (2 + 2 * g.uniform()), t0 = 10 * g.uniform();
      const auto r = qpo::psi_transformed(ctx, m, v0, t0);
      const auto d = qpo::psi_direct(p, m.forcing(), v0, t0, {c.direct_tol});
      worst = std::max({worst, std::abs(r.t1 - d.t1) / std::abs(d.t1), std::abs(r.v1 - d.v1) / std::abs(d.v1)});
    }
    return Battery::bound(worst, 1e-6);
  });
  const auto levels = decade_levels(std::max(1e3, 1.01 * e.T.calI_top), 1e7);
  b.run("one-step gap bound", [&] {
    if (zero) return Battery::skipped("zero forcing");
    if (levels.empty()) return Battery::skipped("no decade level above calI^*");
    const auto gp = qpo::gap_probe(e.ctx(1e-12), levels, n, seed, c.threads);
    sandwich_checks += long(gp.levels.size()) * n;
    if (gp.sandwich_min < 0.25 || gp.sandwich_max > 4) ++sandwich_bad;
    return Battery::bound(gp.max_gap_over_bound, 1.0, std::to_string(gp.violations) + " violations");
  });
  b.run("one-step gap slope", [&] {
    if (zero) return Battery::skipped("zero forcing");
    if (levels.size() < 2) return Battery::skipped("fewer than two decade levels above calI^*");
    const auto gp = qpo::gap_probe(e.ctx(1e-12), levels, n, seed, c.threads);
    return Battery::reported(gp.fit.slope, "fitted over " + std::to_string(gp.levels.size()) + " levels; b_alpha " +
                                               g17(p.b_alpha));
  });
  auto contrast = [&](bool te) {
    if (zero) return Battery::skipped("zero forcing");
    if (levels.size() < 3) return Battery::skipped("fewer than three decade levels above calI^*");
    std::vector<double> sup;
    for (double I : levels) {
      double s = 0;
      for (int k = 0; k < n; ++k) {
        qpo::SplitMix64 g(seed, 15, std::uint64_t(k));
        const auto r = qpo::flow_rate_sup(model(random_theta(g)), 2 * kPi * g.uniform(), I);
        s = std::max(s, te ? r.sup_te : r.sup_h1);
      }
      sup.push_back(s);
    }
    const double target = te ? p.ex.e : (2 - a) / (a + 1);
    const auto f = qpo::fit_loglog(levels, sup);
    return Battery::bound(std::abs(f.slope - target), 0.1, "slope " + g17(f.slope) + ", target " + g17(target));
  };
  b.run("energy rate slope along the flow", [&] { return contrast(true); });
  b.run("adiabatic momentum rate slope", [&] { return contrast(false); });
  b.run("torus map determinant identity", [&] {
    qpo::SplitMix64 g(seed, 16, 0);
    const auto ctx = e.ctx(1e-12);
    double worst = 0;
    for (int i = 0; i < std::max(2, n / 2); ++i) {
      const qpo::TorusMapPoint pt{random_theta(g), 2 * e.T.calI_top * std::pow(100.0, g.uniform())};
      worst = std::max(worst, std::abs(qpo::det_g(ctx, pt) - 1.0));
    }
    return Battery::bound(worst, 1e-4);
  });
  b.run("growth certificate", [&] {
    const auto ctx = e.ctx(c.tol);
    long viol = 0, maps = 0;
    for (int k = 0; k < 4; ++k) {
      qpo::SplitMix64 g(seed, 17, std::uint64_t(k));
      const qpo::TorusMapPoint start{random_theta(g), 2 * e.T.calI_top * std::pow(100.0, g.uniform())};
      const auto s = qpo::iterate_orbit(ctx, start, 0.0, 25 * n, c.policy(false));
      if (s.failed) throw qpo::NumericError(s.failure);
      viol += s.certificate_violations;
      maps += s.n_completed;
    }
    return Battery::bound(double(viol), 0.0, std::to_string(maps) + " map applications");
  });
  b.run("sandwich inequalities", [&] {
    return Battery::bound(double(sandwich_bad), 0.0, std::to_string(sandwich_checks) + " checks");
  });

  json r = report_header("verify", c);
  r["passed"] = b.ok();
  r["checks"] = b.to_json();
  emit(r, out, "verify.json");
  return b.ok() ? kOk : kCheckFailed;
}

// orbit and ensemble

std::string csv_header(std::size_t dim) {
  std::string h = "orbit_id,n,t_n,v_n,varphi_n,calI_n";
  for (std::size_t i = 1; i <= dim; ++i) h += ",theta_" + std::to_string(i);
  return h + ",flags\n";
}

std::string flags_of(const qpo::OrbitSummary& s) {
  std::string f;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!f.empty()) f += '|';
    f += name;
  };
  add(s.left_domain, "left_domain");
  add(s.escape_suspect, "escape_suspect");
  add(s.failed, "failed");
  return f.empty() ? "none" : f;
}

void csv_row(std::string& out, int id, const qpo::OrbitIterate& it, const std::string& flags) {
  out += std::to_string(id) + ',' + std::to_string(it.n) + ',' + g17(it.t) + ',' + g17(it.v) + ',' + g17(it.varphi) +
         ',' + g17(it.calI);
  for (double x : it.theta.coords) out += ',' + g17(qpo::wrap01(x));
  out += ',' + flags + '\n';
}

json summary_json(const qpo::OrbitSummary& s) {
  return {{"n_completed", s.n_completed},
          {"left_domain", s.left_domain},
          {"escape_suspect", s.escape_suspect},
          {"failed", s.failed},
          {"failure", s.failure},
          {"recurrence_count", s.recurrence_count},
          {"growth_ratio", s.growth_ratio},
          {"certificate_violations", s.certificate_violations},
          {"max_gap_over_bound", s.max_gap_over_bound}};
}

json thresholds_brief(const qpo::Thresholds& T) {
  return {{"calI_top", T.calI_top}, {"v_star", T.v_star}, {"C", T.C}};
}

int cmd_orbit(const qpo::RunConfig& c, const std::optional<fs::path>& out_opt) {
  const fs::path out = require_out(out_opt, "orbit");
  const Env e(c);
  const auto ctx = e.ctx(c.tol);
  const auto theta = c.theta_point();
  const auto s = std::isnan(c.v0)
                     ? qpo::iterate_orbit(ctx, {theta + qpo::iota(e.forcing.omega(), c.varphi0), c.calI0}, c.varphi0,
                                          c.n_max, c.policy(true))
                     : qpo::iterate_orbit(ctx, theta, c.v0, c.t0, c.n_max, c.policy(true));
  std::string csv = csv_header(e.forcing.dim());
  for (std::size_t i = 0; i < s.iterates.size(); ++i)
    csv_row(csv, 0, s.iterates[i], i + 1 == s.iterates.size() ? flags_of(s) : "none");
  write_file(out / "orbit.csv", csv);
  json r = report_header("orbit", c);
  r["thresholds"] = thresholds_brief(e.T);
  r["summary"] = summary_json(s);
  r["csv"] = "orbit.csv";
  emit(r, out, "orbit.json");
  return s.failed ? kNumeric : kOk;
}

int cmd_ensemble(const qpo::RunConfig& c, const std::optional<fs::path>& out_opt) {
  const fs::path out = require_out(out_opt, "ensemble");
  const Env e(c);
  const auto res = qpo::ensemble_run(e.ctx(c.tol), c.ensemble());
  std::string csv = csv_header(e.forcing.dim());
  for (const auto& o : res.orbits) {
    const auto& its = o.summary.iterates;
    if (its.empty()) continue;
    if (c.ensemble_all_rows) {
      for (std::size_t i = 0; i < its.size(); ++i)
        csv_row(csv, o.orbit_id, its[i], i + 1 == its.size() ? flags_of(o.summary) : "none");
    } else {
      csv_row(csv, o.orbit_id, its.back(), flags_of(o.summary));
    }
  }
  write_file(out / "ensemble.csv", csv);
  const auto& g = res.gap;
  json r = report_header("ensemble", c);
  r["thresholds"] = thresholds_brief(e.T);
  r["summary"] = {{"n_orbits", res.n_orbits},
                  {"map_applications", res.map_applications},
                  {"n_escape_suspect", res.n_escape_suspect},
                  {"escape_fraction", res.escape_fraction},
                  {"n_left_domain", res.n_left_domain},
                  {"n_failed", res.n_failed},
                  {"max_growth_ratio", res.max_growth_ratio},
                  {"mean_recurrence", res.mean_recurrence},
                  {"certificate_violations", res.certificate_violations}};
  r["gap"] = {{"levels", g.levels},
              {"skipped_levels", g.skipped},
              {"max_gap", g.max_gap},
              {"fit", fit_json(g.fit)},
              {"b_alpha", e.osc.p.b_alpha},
              {"max_gap_over_bound", g.max_gap_over_bound},
              {"violations", g.violations},
              {"max_rate_over_bound", g.max_rate_over_bound},
              {"sandwich", {g.sandwich_min, g.sandwich_max}}};
  r["determinant"] = {{"checks", res.det_residuals.size()}, {"max_residual", res.max_det_residual}};
  r["csv"] = "ensemble.csv";
  emit(r, out, "ensemble.json");
  return res.n_failed ? kNumeric : kOk;
}

// successor

int cmd_successor(const qpo::RunConfig& c, const std::optional<fs::path>& out) {
  const Env e(c);
  const auto ctx = e.ctx(c.tol);
  const auto m = ctx.model(c.theta_point());
  json r = report_header("successor", c);
  r["thresholds"] = thresholds_brief(e.T);
  auto phi_json = [](const qpo::PhiResult& ph) {
    return json{{"varphi1", ph.end.varphi}, {"calI1", ph.end.calI}, {"advance", ph.advance},
                {"gap", ph.gap},            {"min_ratio", ph.min_ratio}, {"max_ratio", ph.max_ratio},
                {"steps", ph.steps}};
  };
  if (std::isnan(c.v0)) {
    const auto ph = qpo::poincare_Phi(m, {c.varphi0, c.calI0}, e.T.calI_top, ctx.phi);
    r["Phi"] = phi_json(ph);
  } else {
    const auto t = qpo::psi_transformed(ctx, m, c.v0, c.t0);
    const auto d = qpo::psi_direct(e.osc.p, m.forcing(), c.v0, c.t0, {c.direct_tol});
    r["transformed"] = {{"t1", t.t1}, {"v1", t.v1}, {"varphi0", t.entry.varphi}, {"calI0", t.entry.calI},
                        {"Phi", phi_json(t.phi)}};
    r["direct"] = {{"t1", d.t1}, {"v1", d.v1}};
    r["relative_discrepancy"] = {{"t1", std::abs(t.t1 - d.t1) / std::abs(d.t1)},
                                 {"v1", std::abs(t.v1 - d.v1) / std::abs(d.v1)}};
  }
  emit(r, out, "successor.json");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Successor maps and escape probes for x'' + |x|^(a-1) x = p(t)"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads, 0 = auto (overrides the config)");
  using Cmd = int (*)(const qpo::RunConfig&, const std::optional<fs::path>&);
  const std::vector<std::tuple<const char*, const char*, Cmd>> commands = {
      {"params", "constants and thresholds", cmd_params},
      {"verify", "property battery, exit 1 on any failed check", cmd_verify},
      {"orbit", "iterate one orbit, write orbit.csv and orbit.json", cmd_orbit},
      {"ensemble", "orbit ensemble over random phases, write ensemble.csv and ensemble.json", cmd_ensemble},
      {"successor", "one evaluation of the successor map", cmd_successor}};
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? kOk : kUsage;
  }

  try {
    qpo::RunConfig cfg = config_path.empty() ? qpo::RunConfig{} : qpo::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    std::optional<fs::path> out;
    if (!out_dir.empty()) {
      out = out_dir;
      std::error_code ec;
      fs::create_directories(*out, ec);
      if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    }
    for (const auto& [name, help, fn] : commands)
      if (app.got_subcommand(name)) return fn(cfg, out);
    return kUsage;
  } catch (const qpo::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kUsage;
  } catch (const qpo::DomainError& ex) {
    std::cerr << "domain error: " << ex.what() << "\n";
    return kUsage;
  } catch (const IoError& ex) {
    std::cerr << "i/o error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "numeric failure: " << ex.what() << "\n";
    return kNumeric;
  }
}
