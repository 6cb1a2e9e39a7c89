#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "lnn/atomic_file.hpp"
#include "lnn/cost_profiler.hpp"
#include "lnn/deploy.hpp"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int status = -1;
  std::string output;
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string("LNN_LOG=info \"") + LNN_CLI_PATH + "\" " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

// One synthetic dataset and one pipeline configuration shared by every test.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "lnn_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const CliResult s = run("synth --out " + (dir_ / "data").string() + " --train-per-class 40 --test-per-class 20");
    ASSERT_EQ(s.status, 0) << s.output;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static std::string args() {
    const std::string data = (dir_ / "data").string();
    std::string a = "--config " + std::string(LNN_SOURCE_DIR) + "/configs/default.cfg";
    a += " --set data.train_files=" + data + "/data_batch_1.bin," + data + "/data_batch_2.bin";
    a += " --set data.test_files=" + data + "/test_batch.bin";
    a += " --set data.train_per_class=30 --set data.val_per_class=10 --set data.test_per_class=20";
    a += " --set train.epochs=2 --set sim.samples=4 --set profile.samples=5";
    a += " --set report.reference=" + std::string(LNN_SOURCE_DIR) + "/data/reference_tables/literature.csv";
    for (const char* key : {"model", "qmodel", "plan", "metrics", "readiness", "golden", "cost", "report", "edges"}) {
      a += std::string(" --set out.") + key + "=" + path(std::string("out/") + key);
    }
    return a;
  }

  static fs::path dir_;
};

fs::path CliPipeline::dir_;

TEST_F(CliPipeline, StagesRunInOrderAndWriteArtifacts) {
  for (const char* stage : {"train", "eval", "quantize", "check", "compile", "simulate", "profile", "report", "wiring"}) {
    const CliResult r = run(args() + " " + stage);
    ASSERT_EQ(r.status, 0) << stage << "\n" << r.output;
  }
  for (const char* file : {"model", "qmodel", "plan", "metrics", "readiness", "golden", "cost", "report", "edges"}) {
    EXPECT_TRUE(fs::exists(path(std::string("out/") + file))) << file;
  }
  for (const auto& entry : fs::directory_iterator(dir_ / "out")) {
    EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos);
  }

  const std::string readiness = lnn::read_file(path("out/readiness"));
  EXPECT_NE(readiness.find("READY"), std::string::npos);
  EXPECT_EQ(readiness.find("NOT READY"), std::string::npos);

  std::istringstream cost(lnn::read_file(path("out/cost")));
  const auto reports = lnn::read_cost_reports(cost);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_TRUE(lnn::throughput_consistent(reports[0]));

  const std::string report = lnn::read_file(path("out/report"));
  EXPECT_NE(report.find("| LNN "), std::string::npos);
  EXPECT_NE(report.find("LNN-desk"), std::string::npos);

  const std::string golden = lnn::read_file(path("out/golden"));
  EXPECT_EQ(golden.size(), 4u * 3u * 4u);
  ASSERT_EQ(run(args() + " simulate").status, 0);
  EXPECT_EQ(lnn::read_file(path("out/golden")), golden);
}

TEST_F(CliPipeline, SameSeedSameModelBytes) {
  const std::string a = args() + " --set train.epochs=1 --set out.model=" + path("seed_a");
  const std::string b = args() + " --set train.epochs=1 --set out.model=" + path("seed_b");
  ASSERT_EQ(run(a + " train").status, 0);
  ASSERT_EQ(run(b + " train").status, 0);
  EXPECT_EQ(lnn::read_file(path("seed_a")), lnn::read_file(path("seed_b")));
  const std::string c = args() + " --set train.epochs=1 --seed 5 --set out.model=" + path("seed_c");
  ASSERT_EQ(run(c + " train").status, 0);
  EXPECT_NE(lnn::read_file(path("seed_a")), lnn::read_file(path("seed_c")));
}

TEST_F(CliPipeline, ReportCsvFormat) {
  const CliResult r = run(args() + " --set out.cost=" + path("absent.csv") + " report --format csv");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("LNN,RTX 3060 / Loihi-2,literature,91.3,0.85,15.2,25.3,213µ"), std::string::npos);
}

TEST(CliErrors, UnknownConfigKeyExitsOneNamingKey) {
  const CliResult r = run("--set model.stepz=3 wiring");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("model.stepz"), std::string::npos);
}

TEST(CliErrors, UnknownSubcommandOrFlagExitsOne) {
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("--bogus wiring").status, 1);
  EXPECT_EQ(run("").status, 1);
}

TEST(CliErrors, HelpExitsZero) {
  const CliResult r = run("--help");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.output.find("simulate"), std::string::npos);
}

TEST(CliErrors, MissingInputsExitTwo) {
  EXPECT_EQ(run("--config /nonexistent/run.cfg wiring").status, 2);
  EXPECT_EQ(run("--set data.train_files=/nonexistent/a.bin train").status, 2);
  EXPECT_EQ(run("--set out.model=/nonexistent/m.lnnm quantize").status, 2);
}

TEST(CliErrors, CorruptModelExitsTwo) {
  const fs::path p = fs::temp_directory_path() / "lnn_cli_corrupt.lnnm";
  lnn::write_file_atomic(p.string(), "LNNM\x09garbage");
  const CliResult r = run("--set out.model=" + p.string() + " eval");
  EXPECT_EQ(r.status, 2);
  fs::remove(p);
}

}  // namespace
