#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "htt/htt.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("htt-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  Result run(const std::string& args) const {
    const auto log = dir / "stdout.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(HTT_CLI_PATH) + "' " + args + " > '" +
                            log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = htt::text::read_file(log.string());
    return r;
  }

  std::string read(const std::string& rel) const { return htt::text::read_file((dir / rel).string()); }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, GenDataRefusesToOverwrite) {
  const auto first = run("gen-data --task arith-9 --data d --seed 3");
  ASSERT_EQ(first.code, 0) << first.output;
  for (const auto* f : {"train", "validation", "test"}) EXPECT_TRUE(fs::exists(dir / "d" / (std::string(f) + ".jsonl")));
  EXPECT_EQ(htt::io::load_instances((dir / "d/train.jsonl").string()).size(), 900u);
  const auto again = run("gen-data --task arith-9 --data d --seed 3");
  EXPECT_EQ(again.code, 2);
  EXPECT_NE(again.output.find("--force"), std::string::npos);
  EXPECT_EQ(run("gen-data --task arith-9 --data d --seed 3 --force").code, 0);
}

TEST_F(Cli, InduceAndDeduceAreReproducible) {
  ASSERT_EQ(run("gen-data --task arith-16 --data d --seed 1").code, 0);
  const std::string common = "--task arith-16 --data d --seed 1 --draws 900";
  const auto induce = run("induce " + common + " --out a");
  ASSERT_EQ(induce.code, 0) << induce.output;
  EXPECT_NE(induce.output.find("rules kept:"), std::string::npos);
  ASSERT_EQ(run("deduce " + common + " --out a").code, 0);
  ASSERT_EQ(run("induce " + common + " --out b").code, 0);
  ASSERT_EQ(run("deduce " + common + " --out b").code, 0);
  EXPECT_EQ(read("a/library.json"), read("b/library.json"));
  EXPECT_EQ(read("a/report.csv"), read("b/report.csv"));
  EXPECT_TRUE(htt::text::starts_with(read("a/report.csv"), "group,n,correct,accuracy\n"));
  const auto summary = nlohmann::json::parse(read("a/summary.json"));
  EXPECT_EQ(summary.at("task"), "arith-16");

  // The resolved configuration reproduces the run.
  const auto cfg = read("a/resolved_config.toml");
  EXPECT_NE(cfg.find("\nk=2\n"), std::string::npos) << cfg;
  ASSERT_EQ(run("deduce --config a/resolved_config.toml --out c --library a/library.json").code, 0);
  EXPECT_EQ(read("a/report.csv"), read("c/report.csv"));
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  ASSERT_EQ(run("gen-data --task kinship --data d").code, 0);
  const auto missing = run("deduce --task kinship --data d --library nope.json");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("library not found: nope.json"), std::string::npos);
  EXPECT_EQ(run("gen-data --task chess --data e").code, 2);
  EXPECT_NE(run("induce --task kinship --data d --epsilon 2").code, 0);
}

TEST_F(Cli, InspectFixture) {
  const auto r = run("inspect '" + htt::asset_path("fixtures/kinship_gpt4.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(htt::text::starts_with(r.output, "kinship: 98 rules\n")) << r.output.substr(0, 200);
}

TEST_F(Cli, ListFunctionsEndToEnd) {
  ASSERT_EQ(run("gen-data --task listfn --data d --n-train 2").code, 0);
  ASSERT_EQ(run("induce --task listfn --data d --out o").code, 0);
  ASSERT_TRUE(fs::exists(dir / "o/library.jsonl"));
  const auto deduce = run("deduce --task listfn --data d --out o");
  ASSERT_EQ(deduce.code, 0) << deduce.output;
  const auto csv = read("o/report.csv");
  EXPECT_NE(csv.find("raw,"), std::string::npos);
  EXPECT_NE(csv.find("task,"), std::string::npos);
}
