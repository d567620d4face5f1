#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "sipov_cli_test";

fs::path write(const std::string& name, const std::string& body) {
  fs::create_directories(kDir);
  const auto p = kDir / name;
  std::ofstream(p) << body;
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SIPOV_CLI) + " " + args + " >" + (kDir / "stdout").string() +
                          " 2>" + (kDir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kGood =
    "topology.proxies = 1\nworkload.segments = 0:3:20\nrun.duration = 3\nrun.seed = 1\n";

}  // namespace

TEST(Cli, RunWritesReport) {
  const auto f = write("good.scn", kGood);
  const auto out = kDir / "out";
  ASSERT_EQ(run("run " + f.string() + " --out " + out.string()), 0);
  for (const char* csv : {"series.csv", "calls.csv", "summary.csv"}) EXPECT_TRUE(fs::exists(out / csv));
}

TEST(Cli, ClusterRunListsMemberPerCall) {
  const auto f = write("cluster.scn", "topology.proxies = 1\ntopology.cluster = 3\nbalancer.name = cjsq\n"
                                      "workload.segments = 0:5:40\nrun.duration = 5\nrun.seed = 2\n");
  const auto out = kDir / "cluster_out";
  ASSERT_EQ(run("run " + f.string() + " --out " + out.string()), 0);
  std::ifstream in(out / "dispatch.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,call_id,algorithm,server,metric");
  std::set<std::string> members;
  while (std::getline(in, line)) {
    std::size_t a = 0;
    for (int i = 0; i < 3; ++i) a = line.find(',', a) + 1;
    members.insert(line.substr(a, line.find(',', a) - a));
  }
  EXPECT_EQ(members, (std::set<std::string>{"c1", "c2", "c3"}));
}

TEST(Cli, ConfigErrorExitsOne) {
  const auto f = write("bad.scn", std::string(kGood) + "controller = rtqc\ncontroller.p_min = 1.5\n");
  EXPECT_EQ(run("run " + f.string() + " --out " + (kDir / "x").string()), 1);
  std::ifstream err(kDir / "stderr");
  std::string text((std::istreambuf_iterator<char>(err)), {});
  EXPECT_NE(text.find("controller.p_min"), std::string::npos);
}

TEST(Cli, UsageErrorExitsOne) { EXPECT_EQ(run("frobnicate"), 1); }

TEST(Cli, MissingFileExitsOne) { EXPECT_EQ(run("run " + (kDir / "nope.scn").string()), 1); }

TEST(Cli, UnwritableOutputExitsTwo) {
  const auto f = write("good2.scn", kGood);
  write("blocker", "x");
  EXPECT_EQ(run("run " + f.string() + " --out " + (kDir / "blocker" / "sub").string()), 2);
}

TEST(Cli, CompareWritesTable) {
  const auto a = write("none.scn", kGood);
  const auto b = write("bangbang.scn", std::string(kGood) + "controller = bangbang\n");
  const auto out = kDir / "cmp";
  ASSERT_EQ(run("compare " + a.string() + " " + b.string() + " --seeds 2 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "compare.csv"));
}

TEST(Cli, CompareMismatchExitsOne) {
  const auto a = write("d3.scn", kGood);
  const auto b = write("d4.scn", "topology.proxies = 1\nworkload.segments = 0:3:20\nrun.duration = 4\nrun.seed = 1\n");
  EXPECT_EQ(run("compare " + a.string() + " " + b.string()), 1);
}

TEST(Cli, FluidPrintsTrajectory) {
  const auto f = write("fluid.scn",
                       "topology.proxies = 2\nworkload.segments = 0:2:50\nrun.duration = 2\nrun.seed = 1\n");
  ASSERT_EQ(run("fluid " + f.string()), 0);
  std::ifstream out(kDir / "stdout");
  std::string first;
  std::getline(out, first);
  EXPECT_EQ(first, "t,q1,q2,r2_prime");
}
