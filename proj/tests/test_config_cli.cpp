#include <gtest/gtest.h>
#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "equicov/cli.hpp"
#include "equicov/config.hpp"

namespace equicov {
namespace {

namespace fs = std::filesystem;

const char* kMinimal = R"(# minimal
[model]
kind = model1
lambda_b_per_m2 = 1

[pathloss]
alphas = 4
)";

std::string config_error(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, MinimalDefaults) {
  const auto cfg = parse_config_string(kMinimal);
  EXPECT_EQ(cfg.model, NetworkModel::model1(1.0));
  EXPECT_EQ(cfg.pathloss, build_pathloss({}, {4.0}));
  EXPECT_EQ(cfg.coverage.epsilon_grid.size(), 101u);
  EXPECT_EQ(cfg.coverage.n_outer, 2000u);
  EXPECT_FALSE(cfg.window_radius.has_value());
  EXPECT_FALSE(cfg.sweep.has_value());
}

TEST(Config, FullModel3) {
  const auto cfg = parse_config_string(R"([model]
kind = model3
lambda_p_per_m2 = 0.3
cluster = mcp
m_bar_u = 4
rho_u_m = 0.5
m_bar_b = 2
rho_b_m = 0.25
[pathloss]
alphas = 3, 4
boundaries_m = 1.5
[coverage]
beta = 2
epsilon_grid = 0, 0.5, 1
policy = max_sir
n_inner = 100
[run]
seed = 99
workers = 2
window_radius_m = 30
[contour]
k_values = 0.5, 2
mode = paired
scale = points_only
)");
  EXPECT_EQ(cfg.model, NetworkModel::model3(0.3, 4.0, 0.5, 2.0, 0.25, ClusterKind::Matern));
  EXPECT_EQ(cfg.pathloss, build_pathloss({1.5}, {3.0, 4.0}));
  EXPECT_EQ(cfg.coverage.epsilon_grid, (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(cfg.coverage.policy, AssociationPolicy::MaxSir);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.workers, 2u);
  EXPECT_EQ(*cfg.window_radius, 30.0);
  EXPECT_EQ(cfg.contour.k_values, (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(cfg.contour.verify.mode, VerifyMode::Paired);
  EXPECT_EQ(cfg.contour.verify.scale_mode, ScaleMode::PointsOnly);
}

TEST(Config, ModelRoundTripsThroughConfigText) {
  const std::pair<NetworkModel, PathlossModel> cases[] = {
      {NetworkModel::model1(0.37, 2.5), build_pathloss({}, {3.3})},
      {NetworkModel::model2(1.7, 5.0, 0.123, ClusterKind::Thomas), build_pathloss({0.5, 4.0}, {2.1, 3.0, 4.4})},
      {NetworkModel::model3(0.3, 4.0, 0.5, 2.0, 0.25, ClusterKind::Matern), build_pathloss({1.0}, {2.5, 4.0})},
  };
  for (const auto& [m, pl] : cases) {
    std::ostringstream os;
    write_model_sections(os, m, pl);
    const auto cfg = parse_config_string(os.str());
    EXPECT_EQ(cfg.model, m) << os.str();
    EXPECT_EQ(cfg.pathloss, pl);
  }
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(config_error(std::string(kMinimal) + "speed = 3\n"), "config:8: unknown or inapplicable key 'pathloss.speed'");
  EXPECT_EQ(config_error(std::string(kMinimal) + "alphas = 3\n"), "config:8: duplicate key 'pathloss.alphas'");
  EXPECT_EQ(config_error("[model]\nkind = model4\n[pathloss]\nalphas = 4\n"),
            "config:2: model kind must be model1, model2 or model3");
  EXPECT_EQ(config_error("[modle]\n"), "config:1: unknown section [modle]");
  EXPECT_EQ(config_error("kind = model1\n"), "config:1: key outside of any section");
  EXPECT_EQ(config_error("[model]\nkind model1\n"), "config:2: expected key = value");
  const auto boundaries = config_error("[model]\nkind = model1\nlambda_b_per_m2 = 1\n[pathloss]\nalphas = 3, 4\n"
                                       "boundaries_m = -1\n");
  EXPECT_EQ(boundaries.rfind("config:6:", 0), 0u) << boundaries;
  const auto lambda = config_error("[model]\nkind = model1\nlambda_b_per_m2 = abc\n[pathloss]\nalphas = 4\n");
  EXPECT_EQ(lambda.rfind("config:3:", 0), 0u) << lambda;
  const auto missing = config_error("[model]\nkind = model2\nlambda_b_per_m2 = 1\nm_bar_u = 3\n[pathloss]\nalphas = 4\n");
  EXPECT_NE(missing.find("rho_u_m"), std::string::npos) << missing;
  const auto k = config_error(std::string(kMinimal) + "[contour]\nk_values = 1, -2\n");
  EXPECT_EQ(k.rfind("config:9:", 0), 0u) << k;
  const auto level = config_error(std::string(kMinimal) +
                                  "[sweep]\nx_param = lambda_b_per_m2\nx_values = 1,2,3\ny_param = rho_m\n"
                                  "y_values = 1,2,3\nlevels = 1.5\n");
  EXPECT_EQ(level.rfind("config:13:", 0), 0u) << level;
  // Model 1 has no cluster parameters: the key is rejected, not ignored.
  EXPECT_EQ(config_error(std::string(kMinimal) + "[model]\nm_bar_u = 3\n"),
            "config:9: unknown or inapplicable key 'model.m_bar_u'");
}

TEST(Config, SampleConfigsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(EQUICOV_SOURCE_DIR) / "configs")) {
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
  }
}

// ---------------------------------------------------------------------------
// CLI end to end

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("equicov_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  // Exit status of `equicov <args>`, with stdout/stderr captured to dir_/log.txt.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" EQUICOV_CLI_PATH "\" " + args + " > \"" + (dir_ / "log.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string log() const { return slurp(dir_ / "log.txt"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const std::string kSmallModel1 = R"([model]
kind = model1
lambda_b_per_m2 = 1
[pathloss]
alphas = 4
[coverage]
n_outer = 200
[run]
seed = 4
)";

const std::string kSmallModel2 = R"([model]
kind = model2
lambda_b_per_m2 = 1
cluster = tcp
m_bar_u = 4
rho_u_m = 0.3
[pathloss]
alphas = 3, 4
boundaries_m = 1
[coverage]
n_outer = 300
policy = max_sir
[run]
seed = 8
)";

TEST_F(CliTest, SampleWritesTwoPatterns) {
  const auto cfg = write_config("m1.cfg", kSmallModel1);
  ASSERT_EQ(run("sample --config " + cfg.string() + " --out " + (dir_ / "o").string()), 0) << log();
  std::ifstream users(dir_ / "o" / "users.csv"), bs(dir_ / "o" / "bs.csv");
  const auto u = read_pattern_csv(users);
  const auto b = read_pattern_csv(bs);
  EXPECT_EQ(u[0], (Point{0, 0}));
  EXPECT_GT(b.size(), 0u);
}

TEST_F(CliTest, SampleModel2FlagsClusterCenterBs) {
  const auto cfg = write_config("m2.cfg", kSmallModel2);
  ASSERT_EQ(run("sample --config " + cfg.string() + " --out " + (dir_ / "o").string()), 0) << log();
  const auto text = slurp(dir_ / "o" / "bs.csv");
  EXPECT_NE(text.find("# cluster_center_bs_row=0"), std::string::npos) << text.substr(0, 300);
  std::istringstream is(text);
  const auto b = read_pattern_csv(is);
  const auto cx = text.find("# cluster_center_x_m=");
  ASSERT_NE(cx, std::string::npos);
  const double x = parse_double(text.substr(cx + 21, text.find('\n', cx) - cx - 21));
  EXPECT_EQ(b[0].x, x);
}

TEST_F(CliTest, InvalidConfigExitsWithUsageCode) {
  const auto cfg = write_config("bad.cfg", std::string(kSmallModel1) + "bogus = 1\n");
  EXPECT_EQ(run("metadist --config " + cfg.string() + " --out " + (dir_ / "o").string()), 1);
  EXPECT_NE(log().find("config:10:"), std::string::npos) << log();
  const auto bad_value = write_config("bad2.cfg", "[model]\nkind = model1\nlambda_b_per_m2 = -1\n[pathloss]\nalphas = 4\n");
  EXPECT_EQ(run("metadist --config " + bad_value.string()), 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("metadist"), 1);
  EXPECT_EQ(run("frobnicate --config x"), 1);
  EXPECT_EQ(run("metadist --config " + (dir_ / "missing.cfg").string()), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, MetadistTwoPointGrid) {
  const auto grid = write_config("grid.cfg", R"([model]
kind = model1
lambda_b_per_m2 = 1
[pathloss]
alphas = 4
[coverage]
n_outer = 100
epsilon_grid = 0, 1
)");
  ASSERT_EQ(run("metadist --config " + grid.string() + " --out " + (dir_ / "o").string()), 0) << log();
  std::istringstream is(slurp(dir_ / "o" / "metadist.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].rfind("0,1,", 0), 0u) << rows[1];
}

TEST_F(CliTest, MetadistBaselineNearOracle) {
  const auto cfg = write_config("m1.cfg", R"([model]
kind = model1
lambda_b_per_m2 = 1
[pathloss]
alphas = 4
[coverage]
n_outer = 2000
confidence = 0.95
[run]
seed = 21
)");
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --out " + (dir_ / "o").string()), 0) << log();
  const auto text = slurp(dir_ / "o" / "metadist.csv");
  auto value = [&](const std::string& key) {
    const auto at = text.find("# " + key + "=");
    return parse_double(text.substr(at + key.size() + 3, text.find('\n', at) - at - key.size() - 3));
  };
  EXPECT_LE(value("mean_coverage_ci_lo"), 0.5600991535115574);
  EXPECT_GE(value("mean_coverage_ci_hi"), 0.5600991535115574);
}

TEST_F(CliTest, DeterministicAcrossRunsAndWorkerCounts) {
  const auto cfg = write_config("m2.cfg", kSmallModel2);
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --workers 1 --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --workers 1 --out " + (dir_ / "b").string()), 0);
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --workers 3 --out " + (dir_ / "c").string()), 0);
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --out " + (dir_ / "d").string(), "EQUICOV_WORKERS=2"), 0);
  const auto a = slurp(dir_ / "a" / "metadist.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "metadist.csv"));
  EXPECT_EQ(a, slurp(dir_ / "c" / "metadist.csv"));
  EXPECT_EQ(a, slurp(dir_ / "d" / "metadist.csv"));
  ASSERT_EQ(run("metadist --config " + cfg.string() + " --seed 9 --out " + (dir_ / "e").string()), 0);
  EXPECT_NE(a, slurp(dir_ / "e" / "metadist.csv"));
}

TEST_F(CliTest, ContourExitCodes) {
  const auto pass = write_config("pass.cfg", kSmallModel2 + "[contour]\nk_values = 0.5, 2\nmode = both\n");
  EXPECT_EQ(run("contour --config " + pass.string() + " --out " + (dir_ / "p").string()), 0) << log();
  EXPECT_TRUE(fs::exists(dir_ / "p" / "contour_verdict.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "p" / "metadist_base.csv"));

  const auto fail = write_config("fail.cfg", R"([model]
kind = model1
lambda_b_per_m2 = 1
[pathloss]
alphas = 2.5, 4
boundaries_m = 1
[coverage]
n_outer = 800
[contour]
k_values = 0.25, 4
scale = points_only
)");
  EXPECT_EQ(run("contour --config " + fail.string() + " --out " + (dir_ / "f").string()), 2) << log();

  const auto empty = write_config("empty.cfg", kSmallModel1 + "[contour]\nk_values =\n");
  EXPECT_EQ(run("contour --config " + empty.string() + " --out " + (dir_ / "e").string()), 1);
  EXPECT_NE(log().find("config:11:"), std::string::npos) << log();
}

// 27 comparisons: the per-comparison level keeps the familywise false-alarm rate
// well under 1%.
TEST_F(CliTest, VoidtestPassAndNegativeControl) {
  const std::string base = kSmallModel1 + "[voidtest]\nprocesses = ppp, tcp, mcp\nk_values = 0.5, 1, 2\nn_trials = 20000\nconfidence = 0.9999\n";
  const auto good = write_config("good.cfg", base);
  EXPECT_EQ(run("voidtest --config " + good.string() + " --out " + (dir_ / "g").string()), 0) << log();
  const auto csv = slurp(dir_ / "g" / "voidtest.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4 + 1 + 3 * 3 * 3);
  const auto bad = write_config("bad.cfg", base + "reparameterization = density_over_k\n");
  EXPECT_EQ(run("voidtest --config " + bad.string() + " --out " + (dir_ / "b").string()), 2) << log();
  EXPECT_EQ(run("voidtest --config " + write_config("none.cfg", kSmallModel1).string()), 1);
}

TEST_F(CliTest, RuntimeFailureExitCode) {
  // An explicit window that cannot hold a BS exhausts the scene retries.
  const auto cfg = write_config("tiny.cfg", R"([model]
kind = model1
lambda_b_per_m2 = 1e-9
[pathloss]
alphas = 4
[coverage]
n_outer = 5
[run]
window_radius_m = 1
)");
  EXPECT_EQ(run("metadist --config " + cfg.string() + " --out " + (dir_ / "o").string()), 3) << log();
}

}  // namespace
}  // namespace equicov
