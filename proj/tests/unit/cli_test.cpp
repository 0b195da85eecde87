#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "cli.hpp"
#include "tempdir.hpp"

namespace crda {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "crda-lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig =
    "data.classes = 3\n"
    "data.samples_per_domain = 24\n"
    "data.height = 16\n"
    "data.width = 16\n"
    "model.feature_dim = 8\n"
    "train.student_mode = ddg\n"
    "train.epochs_reference = 1\n"
    "train.epochs_teacher = 1\n"
    "train.epochs_student = 1\n"
    "train.batch_size = 12\n"
    "train.seed = 2\n";

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"gen-data", "--bogus", "1"}).code, cli::kUsage);
  EXPECT_EQ(run({"corrupt", "--out", "x"}).code, cli::kUsage);
  EXPECT_EQ(run({"gen-data", "--seed", "notanumber", "--out", "x"}).code, cli::kUsage);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, cli::kOk); }

TEST(Cli, RuntimeFailureExitsOne) {
  testing::TempDir dir;
  const Result r = run({"corrupt", "--in", (dir / "missing.tds").string(), "--out", (dir / "c").string()});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  testing::write_bytes(dir / "bad.cfg", "train.seed = 1\ntrain.seed = 2\n");
  const Result bad = run({"train", "--config", (dir / "bad.cfg").string(), "--out", (dir / "r").string()});
  EXPECT_EQ(bad.code, cli::kFailure);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos) << bad.err;
}

TEST(Cli, GenDataAndCorruptWritesSeventyFiveFiles) {
  testing::TempDir dir;
  const Result g = run({"gen-data", "--classes", "3", "--samples", "6", "--seed", "4", "--out", dir.path().string()});
  ASSERT_EQ(g.code, cli::kOk) << g.err;
  ASSERT_TRUE(std::filesystem::exists(dir / "source.tds"));
  const Result c = run({"corrupt", "--in", (dir / "target.tds").string(), "--out", (dir / "c").string()});
  ASSERT_EQ(c.code, cli::kOk) << c.err;
  EXPECT_EQ(c.out, "files=75\n");
  std::size_t count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "c")) {
    (void)e;
    ++count;
  }
  EXPECT_EQ(count, 75u);
  EXPECT_TRUE(std::filesystem::exists(dir / "c" / "target.gaussian_noise.1.tds"));
  EXPECT_TRUE(std::filesystem::exists(dir / "c" / "target.glass_blur.5.tds"));
}

TEST(Cli, TrainIsReproducibleAndFeedsEvaluateAndReport) {
  testing::TempDir dir;
  const std::string cfg = (dir / "tiny.cfg").string();
  testing::write_bytes(cfg, kTinyConfig);
  const Result a = run({"train", "--config", cfg, "--out", (dir / "run1").string()});
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(a.out.rfind("mCE=", 0), 0u) << a.out;
  const Result b = run({"train", "--config", cfg, "--out", (dir / "run2").string()});
  ASSERT_EQ(b.code, cli::kOk) << b.err;
  EXPECT_EQ(testing::read_bytes(dir / "run1" / "metrics.csv"), testing::read_bytes(dir / "run2" / "metrics.csv"));

  const Result seeded = run({"train", "--config", cfg, "--seed", "9", "--mode", "none", "--out", (dir / "run3").string()});
  ASSERT_EQ(seeded.code, cli::kOk) << seeded.err;
  EXPECT_NE(testing::read_bytes(dir / "run3" / "config.echo").find("train.seed = 9"), std::string::npos);

  ASSERT_EQ(run({"gen-data", "--config", cfg, "--out", (dir / "data").string()}).code, cli::kOk);
  const Result ev = run({"evaluate", "--config", cfg, "--model", (dir / "run1" / "student.ckpt").string(), "--reference",
                         (dir / "run1" / "reference.ckpt").string(), "--data", (dir / "data" / "target.tds").string()});
  ASSERT_EQ(ev.code, cli::kOk) << ev.err;
  EXPECT_EQ(ev.out.rfind("mCE=", 0), 0u);

  const Result dg = run({"ddg-gen", "--config", cfg, "--model", (dir / "run1" / "teacher.ckpt").string(), "--source",
                         (dir / "data" / "source.tds").string(), "--data", (dir / "data" / "target.tds").string(),
                         "--batch", "8", "--out", (dir / "ddg").string()});
  ASSERT_EQ(dg.code, cli::kOk) << dg.err;
  EXPECT_NE(dg.out.find("edge_fraction="), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "ddg" / "generated.tds"));

  const Result rp = run({"report", "--runs", (dir / "run1").string() + "," + (dir / "run2").string(), "--out",
                         (dir / "rep").string()});
  ASSERT_EQ(rp.code, cli::kOk) << rp.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "report.svg"));
  EXPECT_NE(rp.out.find("model=student"), std::string::npos) << rp.out;
}

TEST(Cli, ValidateAssumptionsWritesCsv) {
  testing::TempDir dir;
  const std::string cfg = (dir / "tiny.cfg").string();
  testing::write_bytes(cfg, kTinyConfig);
  ASSERT_EQ(run({"gen-data", "--config", cfg, "--samples", "33", "--out", (dir / "data").string()}).code, cli::kOk);
  const Result r = run({"validate-assumptions", "--config", cfg, "--source", (dir / "data" / "source.tds").string(), "--target", (dir / "data" / "target.tds").string(),
                        "--out", (dir / "va").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("assumption1="), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "va" / "assumptions.csv"));
}

}  // namespace
}  // namespace crda
