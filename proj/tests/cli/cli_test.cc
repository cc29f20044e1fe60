#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FEDLEAK_FIXTURES;

int run(const std::string& args) {
  const std::string cmd = std::string(FEDLEAK_BIN) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fedleak_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string sweep_args(const fs::path& out, int jobs) {
  return "sweep --config " + (kFixtures / "cli_sweep.json").string() + " --out " + out.string() +
         " --jobs " + std::to_string(jobs);
}

}  // namespace

TEST(Cli, SweepWritesOneRowPerAttackAndBatchSize) {
  const auto out = scratch("sweep");
  ASSERT_EQ(run(sweep_args(out, 1)), 0);
  const auto csv = slurp(out / "ppc.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "mechanism,attack,strength,ratio,x_axis,accuracy,distance,region,seed,batch_size");
  EXPECT_EQ(count_lines(csv), 1u + 3u * 2u);
}

TEST(Cli, SweepIsByteIdenticalAcrossRunsAndJobs) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const auto c = scratch("rerun_c");
  ASSERT_EQ(run(sweep_args(a, 1)), 0);
  ASSERT_EQ(run(sweep_args(b, 1)), 0);
  ASSERT_EQ(run(sweep_args(c, 4)), 0);
  EXPECT_EQ(slurp(a / "ppc.csv"), slurp(b / "ppc.csv"));
  EXPECT_EQ(slurp(a / "ppc.csv"), slurp(c / "ppc.csv"));
}

TEST(Cli, ReportOnTwoPointFixture) {
  const auto out = scratch("report");
  ASSERT_EQ(run("report --config " + (kFixtures / "report_two_point.json").string() + " --out " +
                out.string()),
            0);
  EXPECT_EQ(slurp(out / "cap.csv"),
            "mechanism,attack,batch_size,cap,n_points\ndp,reconstruction,1,0.5,2\n");
}

TEST(Cli, TrainThenAttackPipeline) {
  const auto out = scratch("pipeline");
  const auto cfg = (kFixtures / "cli_sweep.json").string();
  ASSERT_EQ(run("gen-data --config " + cfg + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "data" / "train-images.idx"));
  ASSERT_EQ(run("train --config " + cfg + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "transcript.jsonl"));
  EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
  EXPECT_EQ(count_lines(slurp(out / "accuracy.csv")), 2u);
  ASSERT_EQ(run("attack --config " + cfg + " --out " + out.string()), 0);
  EXPECT_GT(count_lines(slurp(out / "attack_reports.csv")), 1u);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("train --config " + (kFixtures / "bad_config.json").string()), 2);
  EXPECT_EQ(run("train --config " + (kFixtures / "does_not_exist.json").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("attack --config " + (kFixtures / "missing_transcript.json").string() + " --out " +
                scratch("missing").string()),
            3);
}
