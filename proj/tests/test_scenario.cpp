#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "lowrank/scenario.hpp"

using namespace lowrank;
namespace fs = std::filesystem;

TEST(Presets, CoefficientsMatchTheExamples) {
  const ScenarioConfig e1 = preset("example1");
  EXPECT_EQ(e1.w1, RatTF::from_delay({1.0}, {1.0, -0.2, -0.25, 0.05}));
  EXPECT_EQ(e1.w2, RatTF::from_delay({1.0}, {1.0, -0.6, 0.03, 0.01}));
  EXPECT_EQ(e1.runs, 100);
  EXPECT_EQ(e1.n, 500u);

  const ScenarioConfig e2 = preset("example2");
  EXPECT_EQ(e2.w1, RatTF::from_delay({1.0, 2.0}, {1.0, -0.2}));
  EXPECT_EQ(e2.w2, RatTF::from_delay({1.0, -2.0}, {1.0, -0.2}));

  const ScenarioConfig e3 = preset("example3");
  EXPECT_EQ(e3.kind, ScenarioKind::with_input);
  EXPECT_EQ(e3.f1, RatTF::from_delay({0.0, 0.3, 0.7, 0.3}, {1.0}));
  EXPECT_EQ(e3.f2, RatTF::from_delay({0.0, 0.15, 0.9, -0.5}, {1.0}));
  EXPECT_EQ(e3.k1, RatTF::from_delay({1.0, 0.1, 0.4}, {1.0, 0.3, 0.4}));
  EXPECT_EQ(e3.k2, RatTF::from_delay({1.0, 0.1, 0.4}, {1.0, -0.2, 0.1}));
  EXPECT_EQ(e3.u_variance, 2.0);
  EXPECT_EQ(e3.e_variance, 1.0);
  EXPECT_THROW((void)preset("example4"), Error);
}

TEST(Config, RoundTrip) {
  for (const auto& name : preset_names()) {
    const json j = to_json(preset(name));
    EXPECT_EQ(to_json(parse_config(j)), j) << name;
  }
}

TEST(Config, UnstablePoleIsNamed) {
  json j = to_json(preset("example1"));
  j["system"]["w1"] = {{"num", {1.0}}, {"den", {-1.5, 1.0}}};
  try {
    (void)parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    ASSERT_FALSE(e.issues().empty());
    EXPECT_NE(e.issues()[0].find("system.w1"), std::string::npos);
    EXPECT_NE(e.issues()[0].find("z=1.5"), std::string::npos);
  }
}

TEST(Config, MissingFieldsAreAllReported) {
  json j = to_json(preset("example3"));
  j.erase("n");
  j["noise"].erase("u_variance");
  try {
    (void)parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.issues().size(), 2u);
  }
}

TEST(Scenario, ParamLayoutMatchesEstimates) {
  ScenarioConfig c = preset("example2");
  const ScenarioData d = simulate_scenario(c, mix_seed(c.master_seed, 0));
  const ScenarioEstimate e = estimate_scenario(c, d);
  EXPECT_EQ(e.params.size(), param_layout(c).names.size());
}

namespace {

int run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(LOWRANK_SYSID_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lowrank_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, UnstableSystemExitsWithConfigStatus) {
  const fs::path dir = scratch("unstable");
  json j = to_json(preset("example1"));
  j["system"]["w1"] = {{"num", {1.0}}, {"den", {-1.5, 1.0}}};
  write_text((dir / "bad.json").string(), j.dump());
  EXPECT_EQ(run_cli("run " + (dir / "bad.json").string(), dir / "err.txt"), 2);
  const json err = json::parse(read_text((dir / "err.txt").string()));
  EXPECT_EQ(err["error"], "config");
  EXPECT_NE(err["fields"][0].get<std::string>().find("unstable pole"), std::string::npos);
}

TEST(Cli, MissingFileExitsWithIoStatus) {
  const fs::path dir = scratch("missing");
  EXPECT_EQ(run_cli("run " + (dir / "nope.json").string(), dir / "err.txt"), 3);
}

TEST(Cli, EchoReproducesTheRun) {
  const fs::path dir = scratch("echo");
  ASSERT_EQ(run_cli("preset example2 --out " + (dir / "a").string(), dir / "err.txt"), 0);
  ASSERT_EQ(run_cli("run " + (dir / "a" / "config.echo.json").string() + " --out " + (dir / "b").string(),
                    dir / "err.txt"),
            0);
  for (const char* f : {"runs.csv", "summary.json", "bode.csv", "wiener.json"}) {
    EXPECT_EQ(read_text((dir / "a" / f).string()), read_text((dir / "b" / f).string())) << f;
  }
}

TEST(Cli, SimulateThenIdentify) {
  const fs::path dir = scratch("identify");
  write_text((dir / "cfg.json").string(), to_json(preset("example2")).dump());
  ASSERT_EQ(run_cli("simulate " + (dir / "cfg.json").string() + " --out " + dir.string(), dir / "err.txt"), 0);
  ASSERT_EQ(run_cli("identify " + (dir / "cfg.json").string() + " --data " + (dir / "data.csv").string() +
                        " --out " + dir.string(),
                    dir / "err.txt"),
            0);
  const json rep = json::parse(read_text((dir / "estimate.json").string()));
  EXPECT_TRUE(rep.contains("coefficients"));
}
