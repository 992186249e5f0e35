#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "physkit/asset_io.hpp"
#include "support.hpp"

using nlohmann::json;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;  // stdout followed by stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PHYSKIT_CLI_PATH) + " --log-level warn " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) { return physkit::read_text_file(p); }

json small_eval_config() {
  return json{{"eval", {{"surface_samples", 2000}, {"psnr_views", 2}, {"psnr_resolution", 48}, {"property_resolution", 48}}},
              {"cfm_toy", {{"steps", 40}, {"batch", 64}, {"data_points", 256}, {"hidden", 8}}}};
}

// One fixture tree shared by every test in this file.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const RunResult r = run_cli("fixtures --out " + (dir_->path() / "fx").string());
    ASSERT_EQ(r.code, 0) << r.out;
    std::ofstream(dir_->path() / "small.json") << small_eval_config().dump();
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path fx(const std::string& rel) { return dir_->path() / "fx" / rel; }
  static fs::path tmp(const std::string& rel) { return dir_->path() / rel; }
  static std::string cfg() { return "--config " + tmp("small.json").string() + " "; }

  static TempDir* dir_;
};
TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const RunResult r = run_cli("evaluate --pred a --gt b --bogus 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--bogus"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Usage"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli("").code, 2);
}

TEST_F(CliTest, MissingInputIsValidationError) {
  const RunResult r = run_cli("estimate " + tmp("nowhere").string() + " --out " + tmp("x.json").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(CliTest, EvaluateSelfIsZero) {
  const RunResult r = run_cli(cfg() + "evaluate --pred " + fx("assets/drawer").string() + " --gt " +
                              fx("assets/drawer").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["cd_e3"], 0.0);
  EXPECT_EQ(doc["psnr_db"], 100.0);
  EXPECT_EQ(doc["property_mae"].size(), 7u);
  for (const auto& [k, v] : doc["property_mae"].items()) EXPECT_EQ(v.get<double>(), 0.0) << k;
}

TEST_F(CliTest, EstimateDrawerWithManifest) {
  const fs::path out = tmp("est/drawer.json");
  const std::string args = "estimate " + fx("assets/drawer").string() + " --out " + out.string() + " --pair 2:1:B";
  RunResult r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.out;
  const json doc = json::parse(slurp(out));
  ASSERT_EQ(doc["pairs"].size(), 1u);
  EXPECT_EQ(doc["pairs"][0]["kind"], "B");
  const auto& top = doc["pairs"][0]["candidates"][0]["direction"];
  EXPECT_GT(std::abs(top[0].get<double>()), 0.99);
  json m = json::parse(slurp(out.string() + ".manifest.json"));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["command"], "estimate");
  const std::string first = slurp(out);

  r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(json::parse(slurp(out.string() + ".manifest.json"))["status"], "skipped");
  r = run_cli("--force " + args);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(json::parse(slurp(out.string() + ".manifest.json"))["status"], "ok");
  EXPECT_EQ(slurp(out), first);

  r = run_cli("estimate " + fx("assets/drawer").string() + " --out " + out.string() + " --pair 2:1:E");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_EQ(json::parse(slurp(out.string() + ".manifest.json"))["status"], "failed");
}

TEST_F(CliTest, BackendUnavailableExitsThree) {
  const RunResult r = run_cli("annotate " + fx("assets/laptop").string() + " --out " + tmp("ann_http").string() +
                              " --endpoint http://127.0.0.1:1");
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST_F(CliTest, AnnotationLoopIsByteIdentical) {
  auto run = [&](const std::string& out) {
    return run_cli("--timestamp 2026-01-01T00:00:00Z annotate " + fx("assets/drawer").string() + " --out " +
                   tmp(out).string() + " --mock " + fx("mock/drawer").string() + " --approve --estimate");
  };
  RunResult a = run("ann_a");
  ASSERT_EQ(a.code, 0) << a.out;
  RunResult b = run("ann_b");
  ASSERT_EQ(b.code, 0) << b.out;
  for (const char* f : {"asset.json", "raw_annotation.json", "stubs.json", "review_log.jsonl", "prompt/part_1.png",
                        "part_1.obj", "part_2.obj"}) {
    ASSERT_TRUE(fs::exists(tmp("ann_a") / f)) << f;
    EXPECT_EQ(slurp(tmp("ann_a") / f), slurp(tmp("ann_b") / f)) << f;
  }
  const json asset = json::parse(slurp(tmp("ann_a/asset.json")));
  ASSERT_EQ(asset["constraints"].size(), 1u);
  EXPECT_EQ(asset["constraints"][0]["kind"], "B");
  EXPECT_EQ(asset["constraints"][0]["finalized"], true);
}

TEST_F(CliTest, StrictConfig) {
  std::ofstream(tmp("bad.json")) << R"({"eval": {"no_such_key": 1}})";
  const RunResult r = run_cli("--config " + tmp("bad.json").string() + " evaluate --pred " +
                              fx("assets/drawer").string() + " --gt " + fx("assets/drawer").string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("no_such_key"), std::string::npos) << r.out;
}

TEST_F(CliTest, CfmTrainIsDeterministic) {
  for (const char* name : {"c1.ckpt", "c2.ckpt"}) {
    const RunResult r = run_cli(cfg() + "--seed 4 cfm-toy train --out " + tmp(name).string() + " --trace " +
                                tmp(std::string(name) + ".csv").string());
    ASSERT_EQ(r.code, 0) << r.out;
  }
  EXPECT_EQ(slurp(tmp("c1.ckpt")), slurp(tmp("c2.ckpt")));
  EXPECT_EQ(slurp(tmp("c1.ckpt.csv")), slurp(tmp("c2.ckpt.csv")));
  const RunResult s = run_cli(cfg() + "cfm-toy sample --checkpoint " + tmp("c1.ckpt").string() +
                              " --n 5 --steps 10 --out " + tmp("s.csv").string());
  ASSERT_EQ(s.code, 0) << s.out;
  const std::string csv = slurp(tmp("s.csv"));
  EXPECT_EQ(csv.rfind("x0,x1\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST_F(CliTest, VoxelizeWritesGrid) {
  const RunResult r = run_cli("voxelize " + fx("assets/laptop").string() + " --out " + tmp("l.vox").string() +
                              " --resolution 16 --normalize --embed hashing");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(tmp("l.vox")).substr(0, 8), "PKVOXEL1");
}
