// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = EBMVAR_CLI_PATH;
const std::string kConfigs = EBMVAR_CONFIG_DIR;

int run(const std::string& args, const std::string& log = "cli.log") {
  const std::string cmd = kCli + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json summary(const fs::path& dir) { return json::parse(slurp(dir / "summary.json")); }

fs::path fresh(const std::string& name) {
  const fs::path p = fs::current_path() / "cli_out" / name;
  fs::remove_all(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

const char* kModel = R"([model]
beta_min = 0.38
beta_max = 0.70
T_l = 263
T_u = 300
r0 = -370
r1 = 2
Q = 100
lambda = 139
tau = 0.05
)";

}  // namespace

TEST(Cli, VarianceCurveIceSensitive) {
  const auto out = fresh("vc");
  ASSERT_EQ(run("variance-curve --config " + kConfigs + "/variance_curve.ini --out " + out.string()), 0);
  const auto j = summary(out);
  EXPECT_EQ(j["verdict"], "strictly increasing");
  EXPECT_EQ(j["regimes"]["ice-sensitive"]["verdict"], "strictly increasing");
  const auto csv = slurp(out / "variance_curve.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,T_star,branch,b,sigma0,sigma1,var_inf");
}

TEST(Cli, VarianceCurvePlateau) {
  const auto out = fresh("vcp");
  ASSERT_EQ(run("variance-curve --config " + kConfigs + "/variance_curve_plateau.ini --out " +
                out.string()),
            0);
  EXPECT_EQ(summary(out)["verdict"], "constant");
}

TEST(Cli, MissingKeyExitsWithConfigError) {
  const auto dir = fresh("bad");
  std::string text = kModel;
  text.erase(text.find("r1 = 2\n"), 7);
  write(dir / "bad.ini", text + "[sweep]\nlambdas = 130, 140\n");
  EXPECT_EQ(run("variance-curve --config " + (dir / "bad.ini").string(), (dir / "log").string()), 2);
  EXPECT_NE(slurp(dir / "log").find("model.r1"), std::string::npos);
}

TEST(Cli, UnknownKeyAndMissingFile) {
  const auto dir = fresh("bad2");
  write(dir / "bad.ini", std::string(kModel) + "[sim]\nspeed = 3\n");
  EXPECT_EQ(run("simulate --which reduced --config " + (dir / "bad.ini").string()), 2);
  EXPECT_EQ(run("variance-curve --config /nonexistent.ini"), 2);
  EXPECT_EQ(run("variance-curve"), 2);
}

TEST(Cli, SimulateDeterministic) {
  const auto a = fresh("sim_a"), b = fresh("sim_b");
  const std::string cfg = kConfigs + "/simulate_anomaly_0d.ini";
  ASSERT_EQ(run("simulate --which anomaly-0d --config " + cfg + " --out " + a.string()), 0);
  ASSERT_EQ(run("simulate --which anomaly-0d --threads 3 --config " + cfg + " --out " + b.string()), 0);
  for (const auto* f : {"summary.json", "paths_Y.csv", "moments_Y.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto j = summary(a);
  EXPECT_LE(std::abs(j["z_variance"].get<double>()), 3.0);
  const auto c = fresh("sim_c");
  ASSERT_EQ(run("simulate --which anomaly-0d --seed 99 --config " + cfg + " --out " + c.string()), 0);
  EXPECT_NE(slurp(a / "paths_Y.csv"), slurp(c / "paths_Y.csv"));
  EXPECT_EQ(summary(c)["sim"]["seed"], 99);
}

TEST(Cli, SimulateOtherModes) {
  const auto dir = fresh("sim_modes");
  write(dir / "c.ini", std::string(kModel) + "[sim]\ndt = 0.005\nn_steps = 200\nn_paths = 4\n"
                                             "seed = 3\n[output]\nformats = binary, json\n");
  for (const auto* mode : {"fast-slow", "reduced"}) {
    const auto out = dir / mode;
    ASSERT_EQ(run(std::string("simulate --which ") + mode + " --config " + (dir / "c.ini").string() +
                  " --out " + out.string()),
              0)
        << mode;
    EXPECT_TRUE(fs::exists(out / "paths_T.bin"));
  }
  EXPECT_TRUE(fs::exists(dir / "fast-slow" / "paths_X.bin"));
  EXPECT_NE(run("simulate --which sideways --config " + (dir / "c.ini").string()), 0);
}

TEST(Cli, AnomalyFieldTrace) {
  const auto out = fresh("field");
  ASSERT_EQ(run("simulate --which anomaly-field --config " + kConfigs +
                "/simulate_anomaly_field.ini --out " + out.string()),
            0);
  const auto j = summary(out);
  EXPECT_LE(std::abs(j["z_trace"].get<double>()), 3.0);
}

TEST(Cli, SpatialStationaryCertificate) {
  const auto out = fresh("ss");
  ASSERT_EQ(run("spatial-stationary --config " + kConfigs + "/spatial_stationary.ini --out " +
                out.string()),
            0);
  const auto j = summary(out);
  for (const auto* k : {"k_hurwitz", "minus_k_is_Z", "minus_k_irreducible", "inverse_nonnegative",
                        "coercivity_ok", "c_nonnegative"})
    EXPECT_TRUE(j["certificate"][k].get<bool>()) << k;
  EXPECT_GT(j["trace"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(out / "gamma.mtx"));
  EXPECT_TRUE(fs::exists(out / "K.mtx"));
}

TEST(Cli, SpatialStationaryDegenerateGrid) {
  const auto dir = fresh("ss1");
  write(dir / "c.ini", std::string(kModel) +
                           "[grid]\nLx = 5\nLy = 5\nNx = 2\nNy = 2\n[boundary]\ntheta = 281.5\n");
  ASSERT_EQ(run("spatial-stationary --config " + (dir / "c.ini").string() + " --out " +
                (dir / "o").string()),
            0);
  const auto j = summary(dir / "o");
  // d = 1: b_eff = r1 - Q s + 4/h^2 with h = 2.5, sigma0 = 0.54, sigma1 = s.
  const double s = 0.32 / 37.0, b = 2.0 - 100.0 * s + 4.0 / 6.25;
  const double expect = 0.05 * 0.54 * 0.54 / (2.0 * b - 0.05 * s * s);
  EXPECT_NEAR(j["trace"].get<double>() / expect, 1.0, 1e-10);
}

TEST(Cli, UnstableRefusedUnlessForced) {
  const auto out = fresh("unstable");
  EXPECT_EQ(run("spatial-stationary --config " + kConfigs + "/unstable.ini --out " + out.string()), 4);
  EXPECT_TRUE(summary(out)["trace"].is_null());
  EXPECT_FALSE(summary(out)["certificate"]["k_hurwitz"].get<bool>());
  EXPECT_EQ(run("spatial-stationary --force --config " + kConfigs + "/unstable.ini --out " +
                out.string()),
            0);
  EXPECT_TRUE(summary(out)["forced"].get<bool>());
}

TEST(Cli, MonotonicitySweeps) {
  const auto out = fresh("mono");
  ASSERT_EQ(run("monotonicity --config " + kConfigs + "/monotonicity.ini --out " + out.string()), 0);
  EXPECT_EQ(summary(out)["verdict"], "entrywise-positive");
  EXPECT_TRUE(summary(out)["trace_strictly_increasing"].get<bool>());
  const auto csv = slurp(out / "sweep.csv");
  EXPECT_EQ(csv.rfind("lambda,trace,min_dgamma_entry,verdict", 0), 0u);

  const auto dir = fresh("mono2");
  const std::string grid = "[grid]\nLx = 5\nLy = 5\nNx = 5\nNy = 5\n";
  write(dir / "plateau.ini", std::string(kModel) + grid +
                                 "[boundary]\ntheta = 315\n[sweep]\nlambdas = 230, 240\n");
  ASSERT_EQ(run("monotonicity --config " + (dir / "plateau.ini").string() + " --out " +
                (dir / "p").string()),
            0);
  EXPECT_EQ(summary(dir / "p")["verdict"], "non-applicable");
  write(dir / "neg.ini", std::string(kModel) + grid +
                             "[noise]\nkernel = exponential\nlength = 1.5\nnegative_pair = 0.3\n"
                             "[boundary]\ntheta = 281.5\n[sweep]\nlambdas = 139\n");
  ASSERT_EQ(run("monotonicity --config " + (dir / "neg.ini").string() + " --out " +
                (dir / "n").string()),
            0);
  const auto n = summary(dir / "n");
  EXPECT_EQ(n["verdict"], "hypothesis-violation");
  EXPECT_FALSE(n["points"][0]["notes"].empty());
}

TEST(Cli, Counterexample) {
  const auto out = fresh("cx");
  ASSERT_EQ(run("counterexample --s 0.5 --c 0.8 --out " + out.string()), 0);
  const auto j = summary(out);
  EXPECT_NEAR(j["sign_change_lambda"].get<double>(), 0.4, 1e-8);
  EXPECT_LE(j["max_abs_trace_gap"].get<double>(), 1e-10);
  const auto zero = fresh("cx0");
  ASSERT_EQ(run("counterexample --s 0.5 --c 0 --out " + zero.string()), 0);
  EXPECT_TRUE(summary(zero)["derivative_nonnegative"].get<bool>());
  EXPECT_EQ(run("counterexample --s 1.5 --out " + zero.string()), 2);
}

TEST(Cli, WzConvergenceSmallRun) {
  const auto dir = fresh("wz");
  write(dir / "c.ini", std::string(kModel) + "[sim]\nn_paths = 400\nseed = 1\n"
                                             "[wz]\ntaus = 0.2, 0.1\nt = 2\nx0 = 100\n"
                                             "substeps_per_tau = 50\n");
  ASSERT_EQ(run("wz-convergence --config " + (dir / "c.ini").string() + " --out " +
                (dir / "o").string()),
            0);
  const auto j = summary(dir / "o");
  // x0 = Q: exact is (tau/2)(1 - e^{-2t/tau}).
  EXPECT_NEAR(j["rungs"][0]["exact"].get<double>(), 0.1 * (1.0 - std::exp(-20.0)), 1e-15);
  EXPECT_NEAR(j["exact_slope"].get<double>(), 1.0, 0.05);
  const auto csv = slurp(dir / "o" / "wz_convergence.csv");
  EXPECT_EQ(csv.rfind("tau,mc,exact,se", 0), 0u);
}
