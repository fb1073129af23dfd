#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "mfld/config.hpp"
#include "mfld/csv.hpp"
#include "mfld/experiment.hpp"

using namespace mfld;

namespace {

const std::string kMinimal =
    "problem = lq\nT = 1\nK = 4\nM = 40\nN = 16\nsigma = 1\nds = 1e-3\ntotal_s = 0\nseed = 3\n";

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "no error";
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mfld_test_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, MinimalFileParsesWithDefaults) {
  const auto c = parse(kMinimal + "# comment\n\nxi = 0.5   # trailing\n");
  EXPECT_EQ(c.problem, "lq");
  EXPECT_EQ(c.K, 4u);
  EXPECT_EQ(c.M, 40u);
  EXPECT_EQ(c.total_s, 0.0);
  EXPECT_EQ(c.seed, 3u);
  ASSERT_EQ(c.xi.size(), 1u);
  EXPECT_EQ(c.xi[0], 0.5);
  EXPECT_EQ(c.adjoint_mode, AdjointMode::regression);
}

TEST(Config, ShippedAcceptanceFileParses) {
  const auto c = load_config(std::string(MFLD_SOURCE_DIR) + "/configs/lq_acceptance.cfg");
  EXPECT_EQ(c.M, 64u);
  EXPECT_EQ(c.N, 256u);
  EXPECT_EQ(c.K, 20u);
  EXPECT_EQ(c.total_s, 8.0);
  const auto law = config_gibbs_law(c);
  ASSERT_TRUE(law.has_value());
  EXPECT_DOUBLE_EQ(law->mean, -2.0 / 3.0);
  EXPECT_DOUBLE_EQ(law->variance, 1.0 / 3.0);
}

TEST(Config, MissingKeyIsNamed) {
  EXPECT_EQ(config_error("problem = lq\nT = 1\nK = 4\nM = 40\nN = 8\nds = 1e-3\ntotal_s = 0\nseed = 1\n"),
            "missing key: sigma");
}

TEST(Config, UnknownAndDuplicateKeysAreRejected) {
  EXPECT_EQ(config_error(kMinimal + "sigmaa = 1\n"), "unknown key: sigmaa");
  EXPECT_EQ(config_error(kMinimal + "K = 5\n"), "duplicate key: K");
  EXPECT_NE(config_error(kMinimal + "no equals sign\n").find("line 10"), std::string::npos);
}

TEST(Config, ZeroSigmaIsRejected) {
  std::string text = kMinimal;
  text.replace(text.find("sigma = 1"), 9, "sigma = 0");
  EXPECT_NE(config_error(text).find("sigma"), std::string::npos);
}

TEST(Config, BadValuesNameTheKey) {
  EXPECT_NE(config_error(kMinimal + "c = abc\n").find("key c"), std::string::npos);
  EXPECT_NE(config_error(kMinimal + "adjoint_mode = exact\n").find("adjoint_mode"), std::string::npos);
  EXPECT_NE(config_error(kMinimal + "p = 2\n").find("key p"), std::string::npos);
  EXPECT_NE(config_error(kMinimal + "xi = 0, 1\n").find("key xi"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/mfld.cfg"), ConfigError);
}

TEST(Csv, FlowTraceRoundtripsExactly) {
  FlowTrace t;
  for (int l = 0; l < 3; ++l) {
    FlowRow r;
    r.s = 0.1 * l;
    r.J_sigma = 1.0 / 3.0 + l;
    r.J_stderr = 1e-17 * (l + 1);
    r.moment_q = std::exp(-l);
    r.foc_spread = l == 0 ? std::numeric_limits<double>::quiet_NaN() : 0.123456789012345678;
    r.gibbs_residual = -1e300;
    r.rho_to_ref = 2.0 / 7.0;
    t.rows.push_back(r);
  }
  const auto path = (scratch_dir("roundtrip") / "flow_trace.csv").string();
  write_flow_trace(t, path);
  const auto back = read_csv(path);
  ASSERT_EQ(back.header.size(), 7u);
  EXPECT_EQ(back.header[0], "s");
  EXPECT_EQ(back.header[6], "rho_to_ref");
  ASSERT_EQ(back.rows.size(), 3u);
  for (int l = 0; l < 3; ++l) {
    const auto& r = t.rows[l];
    const auto& b = back.rows[l];
    EXPECT_NEAR(b[0], r.s, 1e-15);
    EXPECT_NEAR(b[1], r.J_sigma, 1e-15);
    EXPECT_EQ(b[2], r.J_stderr);
    EXPECT_EQ(b[3], r.moment_q);
    if (l == 0) EXPECT_TRUE(std::isnan(b[4]));
    else EXPECT_EQ(b[4], r.foc_spread);
    EXPECT_EQ(b[5], r.gibbs_residual);
    EXPECT_EQ(b[6], r.rho_to_ref);
  }
}

TEST(Csv, EmptyTraceIsHeaderOnly) {
  const auto path = scratch_dir("empty") / "flow_trace.csv";
  write_flow_trace(FlowTrace{}, path.string());
  EXPECT_EQ(slurp(path), std::string(kFlowTraceHeader) + "\n");
}

TEST(Csv, CloudRowsAreInJkiOrder) {
  const auto grid = make_time_grid(1.0, 2);
  auto pc = make_control(grid, 2, 2, 1);
  for (std::size_t e = 0; e < pc.theta.size(); ++e) pc.theta[e] = static_cast<double>(e);
  const auto path = (scratch_dir("clouds") / "clouds.csv").string();
  write_clouds(pc, path);
  const auto back = read_csv(path);
  ASSERT_EQ(back.header, (std::vector<std::string>{"j", "k", "i", "a_1"}));
  ASSERT_EQ(back.rows.size(), 8u);
  for (std::size_t r = 0; r < 8; ++r) {
    EXPECT_EQ(back.rows[r][0], static_cast<double>(r / 4));
    EXPECT_EQ(back.rows[r][1], static_cast<double>(r / 2 % 2));
    EXPECT_EQ(back.rows[r][2], static_cast<double>(r % 2));
    EXPECT_EQ(back.rows[r][3], static_cast<double>(r));
  }
}

TEST(Csv, ContractionSchema) {
  ContractionResult c;
  c.s = {0.0, 0.5};
  c.rho = {2.0, 0.9};
  const auto path = (scratch_dir("contraction") / "contraction.csv").string();
  write_contraction(c, path);
  const auto back = read_csv(path);
  EXPECT_EQ(back.header, (std::vector<std::string>{"s", "rho_q"}));
  EXPECT_EQ(back.rows[1][1], 0.9);
}

TEST(Csv, UnwritablePathIsReportedWithPath) {
  try {
    write_flow_trace(FlowTrace{}, "/nonexistent/dir/flow_trace.csv");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/flow_trace.csv"), std::string::npos);
  }
}

TEST(RunExperiment, ZeroHorizonWritesSingleRow) {
  const auto dir = scratch_dir("zero");
  const auto res = run_experiment(parse(kMinimal), dir.string());
  EXPECT_EQ(res.run.trace.rows.size(), 1u);
  EXPECT_EQ(read_csv((dir / "flow_trace.csv").string()).rows.size(), 1u);
  EXPECT_EQ(read_csv((dir / "clouds.csv").string()).rows.size(), 40u * 4u * 16u);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.txt"));
}

TEST(RunExperiment, OutputsAreByteIdentical) {
  std::string text = kMinimal;
  text.replace(text.find("total_s = 0"), 11, "total_s = 0.01");
  const auto cfg = parse(text + "checkpoint_stride = 5\n");
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_experiment(cfg, a.string());
  run_experiment(cfg, b.string());
  for (const char* name : {"flow_trace.csv", "clouds.csv", "summary.txt"})
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  EXPECT_EQ(read_csv((a / "flow_trace.csv").string()).rows.size(), 3u);
}

TEST(VerifyLq, TightenedToleranceFails) {
  auto cfg = parse(kMinimal + "checks = entropy\n");
  const auto loose = verify_lq(cfg, scratch_dir("verify_loose").string());
  ASSERT_EQ(loose.size(), 1u);
  EXPECT_TRUE(all_pass(loose));
  cfg.tolerance_scale = 0.01;
  EXPECT_FALSE(all_pass(verify_lq(cfg, scratch_dir("verify_tight").string())));
}

TEST(VerifyLq, RejectsInstancesWithoutGibbsOracle) {
  const auto cfg = parse(kMinimal + "b = 0.5\n");
  EXPECT_THROW(verify_lq(cfg), ConfigError);
}
