#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "madlab/config.hpp"

using namespace madlab;

namespace {

const std::string kCli = MADLAB_CLI;
const std::string kSrc = MADLAB_SOURCE_DIR;

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  std::string cmd = kCli + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string write_tmp(const std::string& name, const std::string& text) {
  auto path = std::filesystem::temp_directory_path() / ("madlab_test_" + name);
  std::ofstream(path) << text;
  return path.string();
}

const char* kMad = R"(game:
  kind: mad-htlc
fees:
  f: 1
  v_dep: 100
  v_col: 10
  f_a_dep: 2
  f_b_dep: 2
  f_b_col: 2
  f_b_3: 3
population: [0.5, 0.5]
timeout: 3
)";

}  // namespace

TEST(Config, ParsesExample) {
  auto cfg = load_config(kSrc + "/configs/solve_mad.yaml");
  ASSERT_TRUE(cfg.game);
  EXPECT_EQ(cfg.game->miners(), 3u);
  EXPECT_EQ(cfg.config_hash.size(), 64u);
}

TEST(Config, UnknownKeyNamesLine) {
  try {
    parse_config("seed: 1\nbogus: 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Config, FeeBoundNamesKeyAndLine) {
  std::string text = kMad;
  text.replace(text.find("f_a_dep: 2"), 10, "f_a_dep: 1");
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 7);
    EXPECT_NE(std::string(e.what()).find("f_a_dep"), std::string::npos);
  }
}

TEST(Config, PoliciesMustMatchPopulation) {
  EXPECT_THROW(parse_config(std::string(kMad) + "policies:\n  miners: [spe]\n"), ConfigError);
  EXPECT_THROW(parse_config(std::string(kMad) + "policies:\n  miners: [spe, greedy]\n"), ConfigError);
}

TEST(Cli, SolveMad) {
  auto r = run("solve --config " + write_tmp("mad.yaml", kMad));
  ASSERT_EQ(r.rc, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["u_A"], "98");
  EXPECT_EQ(j["u_B"], "8");
  EXPECT_EQ(j["meta"]["tool_version"], kToolVersion);
  EXPECT_EQ(j["meta"]["seed"], 1);
}

TEST(Cli, SolveHtlcAttack) {
  auto r = run("solve --config " + kSrc + "/configs/solve_htlc.yaml");
  ASSERT_EQ(r.rc, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.out)["attack_spe"].get<bool>());
}

TEST(Cli, ConfigErrorExit2) {
  std::string text = kMad;
  text.replace(text.find("f_a_dep: 2"), 10, "f_a_dep: 1");
  EXPECT_EQ(run("solve --config " + write_tmp("bad.yaml", text)).rc, 2);
  EXPECT_EQ(run("solve").rc, 2);
  EXPECT_EQ(run("solve --config /nonexistent.yaml").rc, 2);
}

TEST(Cli, Table5Csv) {
  auto r = run("table5 --config " + kSrc + "/configs/table5.yaml --format csv");
  ASSERT_EQ(r.rc, 0);
  int rows = 0, bad = 0;
  std::istringstream is(r.out);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("label", 0) == 0) continue;
    ++rows;
    bad += line.find("MISMATCH") != std::string::npos;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(bad, 2);
}

TEST(Cli, SeedOverride) {
  auto cfg = write_tmp("sim.yaml", std::string(kMad) + "trials: 50\n");
  auto a = nlohmann::json::parse(run("simulate --config " + cfg + " --seed 9").out);
  EXPECT_EQ(a["meta"]["seed"], 9);
  EXPECT_EQ(a["trials"], 50);
  auto b = nlohmann::json::parse(run("simulate --config " + cfg + " --seed 9 --trials 20").out);
  EXPECT_EQ(b["trials"], 20);
}

TEST(Cli, ScriptClean) {
  auto r = run("script --trials 500");
  ASSERT_EQ(r.rc, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["counterexamples"], 0);
}

TEST(Cli, VerifyOk) {
  EXPECT_EQ(run("verify --config " + kSrc + "/configs/verify.yaml").rc, 0);
}

TEST(Cli, ModelcheckShort) {
  auto r = run("modelcheck --max-len 3");
  EXPECT_EQ(r.rc, 0);
  EXPECT_GT(nlohmann::json::parse(r.out)["scripts_checked"].get<int>(), 0);
}
