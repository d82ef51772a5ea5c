#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qpo/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(QPO_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qpo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& text, const std::string& name = "run.cfg") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

qpo::RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return qpo::parse_config(in);
}

}  // namespace

TEST(RunConfig, DefaultsAndForcingReplacement) {
  const auto d = parse("");
  EXPECT_EQ(d.alpha, 3.0);
  ASSERT_EQ(d.terms.size(), 2u);
  EXPECT_EQ(d.omega.size(), 2u);

  const auto c = parse("# comment\nalpha 5   # trailing\nomega 1,2,3\nterm 1,-1,0 0.2 0.1\ntheta 0.1,0.2,0.3\n");
  EXPECT_EQ(c.alpha, 5.0);
  ASSERT_EQ(c.terms.size(), 1u);
  EXPECT_EQ(c.terms[0].k, (std::vector<int>{1, -1, 0}));
  EXPECT_EQ(c.terms[0].a, 0.2);
  EXPECT_EQ(c.terms[0].b, 0.1);
  EXPECT_EQ(c.theta_point().coords, (std::vector<double>{0.1, 0.2, 0.3}));

  EXPECT_TRUE(parse("omega 1\n").forcing().is_zero());
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_THROW(parse("alpha 2.9\n"), qpo::ConfigError);
  EXPECT_THROW(parse("alpha three\n"), qpo::ConfigError);
  EXPECT_THROW(parse("alpha 3\nalpha 4\n"), qpo::ConfigError);
  EXPECT_THROW(parse("omega 1,2\nterm 1 0.1 0\n"), qpo::ConfigError);
  EXPECT_THROW(parse("theta 0.5\n"), qpo::ConfigError);
  EXPECT_THROW(parse("n_max 0\n"), qpo::ConfigError);
  EXPECT_THROW(parse("calI_lo 10\ncalI_hi 5\n"), qpo::ConfigError);
  EXPECT_THROW(parse("v0 10\n"), qpo::ConfigError);
  EXPECT_THROW(parse("seed -1\n"), qpo::ConfigError);
  EXPECT_THROW(parse("ensemble_rows some\n"), qpo::ConfigError);
  try {
    parse("alpha 3\n\nsafty 2\n");
    FAIL();
  } catch (const qpo::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("unknown key"), std::string::npos);
  }
}

TEST_F(CliTest, ParamsReportsConstants) {
  const auto r = run("params");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_NEAR(j["params"]["Lambda"].get<double>(), 1.1803406, 1e-7);
  EXPECT_NEAR(j["params"]["b_alpha"].get<double>(), -0.25, 1e-15);
  EXPECT_LT(j["thresholds"]["v_star"].get<double>(), 0.0);
  for (const auto& [k, v] : j["identities"].items()) EXPECT_LT(v.get<double>(), 1e-12) << k;
}

TEST_F(CliTest, ParamsRejectsSmallAlpha) {
  EXPECT_EQ(run("params --config " + config("alpha 2.9\n")).code, 2);
  EXPECT_EQ(run("params --config " + path("missing.cfg")).code, 2);
  EXPECT_EQ(run("params --config " + config("alpha 3\nwhatever 1\n")).code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("params --bogus").code, 2);
}

TEST_F(CliTest, ParamsRerunIsIdentical) {
  const auto cfg = config("alpha 4\n");
  const auto a = run("params --config " + cfg + " --out " + path("a"));
  const auto b = run("params --config " + cfg + " --out " + path("b"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(path("a/params.json")), slurp(path("b/params.json")));
  EXPECT_EQ(slurp(path("a/params.json")), a.out);
}

TEST_F(CliTest, VerifyDefaultPasses) {
  const auto r = run("verify --out " + path("v"));
  EXPECT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  int passed = 0;
  for (const auto& c : j["checks"]) {
    EXPECT_NE(c["status"], "fail") << c["name"] << " " << c["detail"];
    passed += c["status"] == "pass";
  }
  EXPECT_GE(passed, 14);
  EXPECT_TRUE(fs::exists(path("v/verify.json")));
}

TEST_F(CliTest, VerifyTamperedKappaFails) {
  const auto r = run("verify --config " + config("tamper_kappa1 1e-6\n"));
  EXPECT_EQ(r.code, 1);
  const auto j = json::parse(r.out);
  bool found = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "energy-action identity") {
      found = true;
      EXPECT_EQ(c["status"], "fail");
    }
  EXPECT_TRUE(found);
}

TEST_F(CliTest, VerifyZeroForcingSkipsScalingFits) {
  const auto r = run("verify --config " + config("omega 1,1.4142135623730951\n"));
  EXPECT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  int skipped = 0;
  for (const auto& c : j["checks"]) {
    EXPECT_NE(c["status"], "fail") << c["name"];
    skipped += c["status"] == "skipped";
  }
  EXPECT_GE(skipped, 4);
}

TEST_F(CliTest, OrbitUnforcedHasConstantAction) {
  const auto r = run("orbit --config " + config("omega 1\nn_max 25\ncalI0 5e3\n") + " --out " + path("o"));
  ASSERT_EQ(r.code, 0);
  std::ifstream in(path("o/orbit.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "orbit_id,n,t_n,v_n,varphi_n,calI_n,theta_1,flags");
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_EQ(f[1], std::to_string(rows));
    EXPECT_EQ(std::stod(f[5]), 5e3);
    EXPECT_LT(std::stod(f[3]), 0.0);
    ++rows;
  }
  EXPECT_EQ(rows, 26);
}

TEST_F(CliTest, OrbitFromZeroCrossingAndNeedsOut) {
  const auto cfg = config("v0 -300\nt0 0.25\nn_max 10\n");
  EXPECT_EQ(run("orbit --config " + cfg).code, 2);
  const auto r = run("orbit --config " + cfg + " --out " + path("o"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["summary"]["n_completed"], 10);
  EXPECT_EQ(run("orbit --config " + config("v0 -1\n", "slow.cfg") + " --out " + path("o2")).code, 2);
}

TEST_F(CliTest, EnsembleIsByteIdentical) {
  const auto cfg = config("n_theta 3\nn_orbits 4\nn_max 30\ngap_samples 4\ndet_checks 2\n");
  ASSERT_EQ(run("ensemble --config " + cfg + " --seed 42 --threads 1 --out " + path("a")).code, 0);
  ASSERT_EQ(run("ensemble --config " + cfg + " --seed 42 --threads 4 --out " + path("b")).code, 0);
  ASSERT_EQ(run("ensemble --config " + cfg + " --seed 43 --out " + path("c")).code, 0);
  const auto a = slurp(path("a/ensemble.csv"));
  EXPECT_EQ(a, slurp(path("b/ensemble.csv")));
  EXPECT_EQ(slurp(path("a/ensemble.json")), slurp(path("b/ensemble.json")));
  EXPECT_NE(a, slurp(path("c/ensemble.csv")));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 13);

  const auto j = json::parse(slurp(path("a/ensemble.json")));
  EXPECT_EQ(j["summary"]["n_orbits"], 12);
  EXPECT_EQ(j["summary"]["map_applications"], 360);
  EXPECT_EQ(j["summary"]["n_escape_suspect"], 0);
  EXPECT_EQ(j["gap"]["violations"], 0);
  EXPECT_TRUE(j["gap"]["fit"]["slope"].is_number());
}

TEST_F(CliTest, EnsembleAllRowsSortedByOrbitThenStep) {
  const auto cfg = config("n_theta 2\nn_orbits 2\nn_max 5\ngap_samples 0\ndet_checks 0\nensemble_rows all\n");
  ASSERT_EQ(run("ensemble --config " + cfg + " --out " + path("e")).code, 0);
  std::ifstream in(path("e/ensemble.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<int, int>> keys;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string id, n;
    std::getline(ss, id, ',');
    std::getline(ss, n, ',');
    keys.emplace_back(std::stoi(id), std::stoi(n));
  }
  ASSERT_EQ(keys.size(), 24u);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST_F(CliTest, SuccessorRoutesAgree) {
  const auto r = run("successor --config " + config("v0 -800\nt0 0.7\ntheta 0.3,0.6\nalpha 4\n"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_LT(j["relative_discrepancy"]["t1"].get<double>(), 1e-6);
  EXPECT_LT(j["relative_discrepancy"]["v1"].get<double>(), 1e-6);
  EXPECT_LT(j["transformed"]["v1"].get<double>(), 0.0);

  const auto phi = json::parse(run("successor --config " + config("calI0 1e5\n", "phi.cfg")).out);
  EXPECT_GT(phi["Phi"]["advance"].get<double>(), 0.0);
  EXPECT_EQ(run("successor --config " + config("calI0 10\n", "low.cfg")).code, 2);
}
