#include <steptime/cli.h>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace steptime;
namespace fs = std::filesystem;

namespace
{

struct CliResult
{
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args)
{
  args.insert(args.begin(), "steptime");
  std::vector<const char *> argv;
  for(const auto & a : args)
  {
    argv.push_back(a.c_str());
  }
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string & name)
{
  const fs::path p = fs::temp_directory_path() / ("steptime_cli_" + name);
  fs::remove_all(p);
  return p;
}

} // namespace

TEST(Cli, NominalPrintsTheGait)
{
  const auto r = invoke({"nominal", "--v", "1", "0"});
  EXPECT_EQ(r.code, exit_ok);
  EXPECT_NE(r.out.find("T_nom=0.35"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("L_nom=0.35"), std::string::npos);
  EXPECT_NE(r.out.find("b_x=0.145452"), std::string::npos);
}

TEST(Cli, RunWritesTraceAndSummary)
{
  const fs::path dir = scratch("run");
  const auto r = invoke({"run", "--scenario", "fig3_push_recovery", "--out", dir.string()});
  EXPECT_EQ(r.code, exit_ok) << r.err;
  ASSERT_TRUE(fs::exists(dir / "fig3_push_recovery_trace.csv"));
  std::ifstream f(dir / "fig3_push_recovery_summary.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j.at("outcome"), "RECOVERED");
  EXPECT_EQ(j.at("exit_code"), 0);
}

TEST(Cli, FixedTimingDivergesWithExitTwo)
{
  const fs::path dir = scratch("fixed");
  const auto r = invoke({"run", "--scenario", "fig3_push_recovery", "--set", "controller=fixed_timing", "--out", dir.string()});
  EXPECT_EQ(r.code, exit_diverged);
  EXPECT_NE(r.out.find("DIVERGED"), std::string::npos);
}

TEST(Cli, MalformedScenarioExitsOneWithKeyPath)
{
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  const fs::path file = dir / "bad.yaml";
  std::ofstream(file) << "name: bad\nbounds:\n  L_max: 0.5\n  W_sideways: 0.1\n";
  const auto r = invoke({"run", "--scenario", file.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, exit_error);
  EXPECT_NE(r.err.find("bounds.W_sideways"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne)
{
  EXPECT_EQ(invoke({}).code, exit_error);
  EXPECT_EQ(invoke({"fly"}).code, exit_error);
  EXPECT_EQ(invoke({"run"}).code, exit_error);
  EXPECT_EQ(invoke({"run", "--scenario", "does_not_exist"}).code, exit_error);
  EXPECT_EQ(invoke({"--help"}).code, exit_ok);
}

TEST(Cli, CertifyReportsWithinOneCell)
{
  const fs::path dir = scratch("certify");
  const auto r = invoke({"certify", "--out", dir.string()});
  EXPECT_EQ(r.code, exit_ok);
  EXPECT_TRUE(fs::exists(dir / "certification.json"));
  EXPECT_NE(r.out.find("within one cell"), std::string::npos);
}

TEST(Cli, SweepWritesEnvelope)
{
  const fs::path dir = scratch("sweep");
  const auto r = invoke({"sweep", "--scenario", "fig4_envelope", "--thetas", "0,90", "--tolerance", "20", "--out", dir.string()});
  EXPECT_EQ(r.code, exit_ok) << r.err;
  std::ifstream f(dir / "fig4_envelope_adaptive_envelope.csv");
  std::string header, a, b, c;
  std::getline(f, header);
  std::getline(f, a);
  std::getline(f, b);
  EXPECT_FALSE(std::getline(f, c));
  EXPECT_EQ(header.rfind("theta_deg,max_force_N,impulse_Ns", 0), 0u);
}

TEST(Cli, OutputDirectoryFromEnvironment)
{
  const fs::path dir = scratch("env");
  ::setenv("STEPTIME_OUT_DIR", dir.string().c_str(), 1);
  const auto r = invoke({"run", "--scenario", "nominal_walk", "--set", "duration=0.5"});
  ::unsetenv("STEPTIME_OUT_DIR");
  EXPECT_EQ(r.code, exit_ok) << r.err;
  EXPECT_TRUE(fs::exists(dir / "nominal_walk_trace.csv"));
}

TEST(Cli, ProcessExitCodes)
{
  const fs::path dir = scratch("process");
  const std::string cli = STEPTIME_CLI_PATH;
  const int ok = std::system((cli + " run --scenario nominal_walk --set duration=0.5 --out " + dir.string() + " > /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(ok), 0);
  const int bad = std::system((cli + " run --scenario nominal_walk --set bogus=1 --out " + dir.string() + " 2> /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(bad), 1);
}
