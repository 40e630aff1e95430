#include "cli.hpp"
#include "rbflow/flow.hpp"
#include "rbflow/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace rbflow;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rbflow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CsvTable csv(const fs::path& p) {
  std::ifstream is(p);
  return read_csv(is);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("rbflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string out(const std::string& sub = "a") const { return (dir / sub).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(CliTest, SymbolSchoutenIsDegenerate) {
  ASSERT_EQ(run_cli({"--out", out(), "symbol", "--n", "3", "--rho", "0.25"}), cli::ok);
  const std::string text = slurp(dir / "a" / "symbol.csv");
  EXPECT_NE(text.find("degenerate_schouten"), std::string::npos);
  const CsvTable t = [&] {
    // classification column is text; check the numeric part by hand.
    std::istringstream is(text);
    std::string header, line;
    std::getline(is, header);
    EXPECT_EQ(header, "n,rho,eigenvalue,multiplicity,classification");
    CsvTable out;
    while (std::getline(is, line)) {
      std::vector<double> row;
      std::stringstream ls(line);
      std::string c;
      for (int i = 0; i < 4 && std::getline(ls, c, ','); ++i) row.push_back(std::stod(c));
      out.rows.push_back(row);
    }
    return out;
  }();
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_NEAR(t.rows[0][2], 0.0, 1e-12);
  EXPECT_EQ(t.rows[0][3], 1.0);
  EXPECT_NEAR(t.rows[1][2], 1.0, 1e-12);
  EXPECT_EQ(t.rows[1][3], 5.0);
}

TEST_F(CliTest, SphereFlowBlowsUpAtExtinction) {
  const int code = run_cli({"--out", out(), "flow", "--n", "3", "--model", "round_sphere", "--init", "sphere", "--rho",
                            "0", "--t-end", "1", "--dt", "1e-4"});
  EXPECT_EQ(code, cli::blow_up);
  const CsvTable t = csv(dir / "a" / "monitors.csv");
  const auto& last = t.rows.back();
  EXPECT_NEAR(last[0], 0.25, 0.02 * 0.25);
  EXPECT_GT(last[4], 1e6);
  // The last sample before the threshold must still follow the closed form.
  const auto& prev = t.rows[t.rows.size() - 2];
  const SphereSolution s = sphere_solution(1.0, 3, 0.0, prev[0]);
  EXPECT_NEAR(prev[1] / s.scalar, 1.0, 1e-8);
}

TEST_F(CliTest, FiberFromOriginStaysAtOrigin) {
  ASSERT_EQ(run_cli({"--out", out(), "fiber", "--start", "0,0,0", "--plot", "false"}), cli::ok);
  const CsvTable t = csv(dir / "a" / "trajectory.csv");
  EXPECT_EQ(t.rows.size(), 101u);
  for (const auto& r : t.rows)
    for (int c = 1; c < 4; ++c) EXPECT_EQ(r[c], 0.0);
}

TEST_F(CliTest, FiberBlowUpExitCode) {
  EXPECT_EQ(run_cli({"--out", out(), "fiber", "--start", "1,0.5,0", "--t-end", "5"}), cli::blow_up);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({"--out", out()}), cli::usage);
  EXPECT_EQ(run_cli({"--out", out(), "flow", "--bogus", "1"}), cli::usage);
  EXPECT_EQ(run_cli({"--out", out(), "flow", "--rho", "0.6"}), cli::usage);
  EXPECT_EQ(run_cli({"--out", out(), "flow", "--config", (dir / "missing.cfg").string()}), cli::usage);
  EXPECT_EQ(run_cli({"--out", out(), "fiber", "--start", "0,1,0"}), cli::usage);
  fs::create_directories(dir);
  std::ofstream(dir / "bad.csv") << "t,a\n1,x\n";
  EXPECT_EQ(run_cli({"--out", out(), "plots", "--csv", (dir / "bad.csv").string()}), cli::usage);
}

TEST_F(CliTest, ConeAndHiSweepsPass) {
  EXPECT_EQ(run_cli({"--out", out(), "cones", "--count", "20"}), cli::ok);
  const std::string summary = slurp(dir / "a" / "cones_summary.csv");
  EXPECT_EQ(summary.rfind("cone,rho,runs,exits,blow_ups,min_scaled_margin\n", 0), 0u);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 16);
  EXPECT_EQ(run_cli({"--out", out(), "hi", "--count", "20"}), cli::ok);
  const CsvTable s = csv(dir / "a" / "hi_summary.csv");
  ASSERT_EQ(s.rows.size(), 3u);
  for (const auto& r : s.rows) EXPECT_EQ(r[2], 0.0);
  EXPECT_TRUE(fs::exists(dir / "a" / "hi_fmin.svg"));
}

TEST_F(CliTest, OutputsAreDeterministicAcrossThreadCounts) {
  const std::vector<std::string> args{"cones", "--count", "30", "--seed", "9"};
  auto with = [&](const std::string& sub, const char* threads) {
    setenv("RBFLOW_THREADS", threads, 1);
    std::vector<std::string> a{"--out", out(sub)};
    a.insert(a.end(), args.begin(), args.end());
    EXPECT_EQ(run_cli(a), cli::ok);
    unsetenv("RBFLOW_THREADS");
  };
  with("one", "1");
  with("two", "1");
  with("four", "4");
  const std::string m1 = slurp(dir / "one" / "manifest.cfg");
  EXPECT_EQ(m1, slurp(dir / "two" / "manifest.cfg"));
  EXPECT_EQ(m1, slurp(dir / "four" / "manifest.cfg"));
  EXPECT_EQ(slurp(dir / "one" / "cones.csv"), slurp(dir / "four" / "cones.csv"));
}

TEST_F(CliTest, ManifestReproducesTheRun) {
  ASSERT_EQ(run_cli({"--out", out("first"), "flow", "--t-end", "0.02", "--energy-k", "1", "--residuals", "scalar",
                     "--sample-every", "5"}),
            cli::ok);
  const fs::path manifest = dir / "first" / "manifest.cfg";
  const std::string m = slurp(manifest);
  EXPECT_NE(m.find("# subcommand: flow"), std::string::npos);
  EXPECT_NE(m.find("# sha256 "), std::string::npos);
  ASSERT_EQ(run_cli({"--out", out("second"), "flow", "--config", manifest.string()}), cli::ok);
  EXPECT_EQ(slurp(dir / "second" / "manifest.cfg"), m);
  EXPECT_EQ(slurp(dir / "second" / "monitors.csv"), slurp(dir / "first" / "monitors.csv"));
  const TensorField g = load_tensor_field((dir / "second" / "final_metric.rbtf").string());
  EXPECT_EQ(g.rank(), 2);
  EXPECT_EQ(g.grid().dims(), (std::vector<int>{32, 32}));
  const CsvTable mon = csv(dir / "second" / "monitors.csv");
  EXPECT_EQ(mon.header.back(), "grad_riem_l2_sq_1");
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "count = 7\nrho = 0\n";
  ASSERT_EQ(run_cli({"--out", out(), "hi", "--config", (dir / "run.cfg").string(), "--count", "3", "--plot", "false"}),
            cli::ok);
  const CsvTable s = csv(dir / "a" / "hi_summary.csv");
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0][1], 3.0);
}

TEST_F(CliTest, EstimatesAndPlots) {
  ASSERT_EQ(run_cli({"--out", out(), "estimates", "--count", "4", "--grid", "32,32", "--refine", "true", "--k-max", "3"}),
            cli::ok);
  const CsvTable s = csv(dir / "a" / "estimates_summary.csv");
  EXPECT_EQ(s.rows.size(), 9u);
  for (const auto& r : s.rows) {
    EXPECT_LE(r[4], r[5]);
    EXPECT_LE(r[6], r[7]);
    EXPECT_LE(r[8], 0.1);
  }
  ASSERT_EQ(run_cli({"--out", out(), "plots", "--csv", (dir / "a" / "estimates_summary.csv").string()}),
            cli::usage);  // header does not start with t
  ASSERT_EQ(run_cli({"--out", out("f"), "flow", "--t-end", "0.01", "--plots", "false"}), cli::ok);
  ASSERT_EQ(run_cli({"--out", out("p"), "plots", "--csv", (dir / "f" / "monitors.csv").string()}), cli::ok);
  EXPECT_TRUE(fs::exists(dir / "p" / "monitors_R_min.svg"));
}
