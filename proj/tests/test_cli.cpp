#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "crowdflow/cli.hpp"

using namespace crowdflow;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "crowdflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("crowdflow_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> tiny = {"--set", "mesh.nx=12", "--set", "mesh.ny=12", "--set", "eikonal.nodes=32"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Cli, UsageErrors) {
  std::string err;
  EXPECT_EQ(cli({"run", "--bogus"}, nullptr, &err), 1);
  EXPECT_NE(err.find("run"), std::string::npos);
  EXPECT_EQ(cli({}), 1);
  EXPECT_EQ(cli({"--help"}), 0);
  EXPECT_EQ(cli({"run", "--scenario", "tourists", "--out", "x", "--format", "gif"}), 1);
}

TEST(Cli, ConfigErrorsExitOne) {
  const auto dir = fresh_dir("cfg");
  std::string err;
  EXPECT_EQ(cli({"run", "--scenario", "tourists", "--out", dir.string(), "--set", "cfl=1.5"}, nullptr, &err), 1);
  EXPECT_NE(err.find("cfl"), std::string::npos);
  EXPECT_EQ(cli({"run", "--scenario", "parade", "--out", dir.string()}), 1);
  EXPECT_EQ(cli({"run", "--scenario", "tourists", "--out", dir.string(), "--config", "/nonexistent/c.json"}), 2);
  fs::remove_all(dir);
}

TEST(Cli, MissingResumeFileExitsTwo) {
  const auto dir = fresh_dir("resume");
  EXPECT_EQ(cli(with({"run", "--scenario", "crosswalk", "--out", dir.string(), "--resume", "/nonexistent/s.json"},
                     tiny)),
            2);
  fs::remove_all(dir);
}

TEST(Cli, RunWritesDeterministicOutput) {
  const auto a = fresh_dir("run_a"), b = fresh_dir("run_b");
  for (const auto& d : {a, b}) {
    std::string out;
    ASSERT_EQ(cli(with({"run", "--scenario", "crosswalk", "--tfinal", "0.1", "--frames", "0.05", "--out", d.string(),
                        "--format", "both", "--save-state"},
                       tiny),
                  &out),
              0)
        << out;
  }
  for (const char* f : {"frame_00000.csv", "frame_00002.csv", "agents_00002.csv", "frame_00002.vtk",
                        "agents_00001.vtk", "diagnostics.csv", "manifest.json", "state.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
  }
  EXPECT_FALSE(fs::exists(a / "frame_00003.csv"));
  auto m = json::parse(read_text_file(a / "manifest.json"));
  EXPECT_EQ(m["parameters"]["mesh.nx"], 12);
  EXPECT_EQ(m["run"]["t_final"], 0.1);

  // resuming from the saved state continues the run
  const auto c = fresh_dir("run_c");
  EXPECT_EQ(cli(with({"run", "--scenario", "crosswalk", "--tfinal", "0.15", "--frames", "0.05", "--out", c.string(),
                      "--resume", (a / "state.json").string()},
                     tiny)),
            0);
  EXPECT_TRUE(fs::exists(c / "frame_00003.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Cli, VerifyAndMesh) {
  const auto dir = fresh_dir("verify");
  std::string out;
  EXPECT_EQ(cli({"verify", "--suite", "conservation", "--scenario", "hooligans", "--set", "mesh.nx=10", "--set",
                 "mesh.ny=10", "--steps", "5", "--out", dir.string()},
                &out),
            0);
  EXPECT_NE(out.find("[PASS] conservation/hooligans"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_EQ(cli({"verify", "--suite", "nonsense"}), 1);
  EXPECT_EQ(cli({"mesh", "--scenario", "crosswalk", "--set", "mesh.nx=10", "--set", "mesh.ny=10", "--out",
                 (dir / "mesh.vtk").string()},
                &out),
            0);
  EXPECT_NE(out.find("snapped"), std::string::npos);
  fs::remove_all(dir);
}

#ifdef CROWDFLOW_CLI_PATH
TEST(Cli, ExecutableExitCodes) {
  const std::string exe = CROWDFLOW_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((exe + " run --nope > /dev/null 2>&1").c_str())), 1);
  EXPECT_EQ(WEXITSTATUS(std::system((exe + " --help > /dev/null 2>&1").c_str())), 0);
}
#endif
