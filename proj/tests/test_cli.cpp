#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <json.hpp>

#include "drcs/report_io.hpp"

namespace fs = std::filesystem;
using drcs::read_file;
using nlohmann::json;

namespace {

const std::string kScenario = std::string(DRCS_TEST_DATA) + "/small_corridor.json";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("drcs_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the CLI with stdout and stderr captured into files; returns the exit status.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + std::string(DRCS_CLI) + "' " + args + " >'" + at("stdout.txt") + "' 2>'" +
                            at("stderr.txt") + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string err() const { return read_file(at("stderr.txt")); }
  std::string out() const { return read_file(at("stdout.txt")); }

  std::string write_scenario(const json& j, const std::string& name) const {
    const std::string p = at(name);
    drcs::write_file(p, j.dump(1));
    return p;
  }

  fs::path dir_;
};

json small() { return json::parse(read_file(kScenario)); }

}  // namespace

TEST_F(Cli, PlanSimulateValidateRender) {
  ASSERT_EQ(run("plan " + kScenario + " --out " + at("a") + " --dump-cone " + at("a/program.cone")), 0) << err();
  EXPECT_TRUE(fs::exists(at("a/solution.json")));
  EXPECT_EQ(read_file(at("a/program.cone")).rfind("drcs-cone/1\n", 0), 0u);
  EXPECT_TRUE(fs::exists(at("a/schedule.csv")));
  ASSERT_EQ(run("simulate " + kScenario + " " + at("a/solution.json") + " --out " + at("a")), 0) << err();
  EXPECT_TRUE(fs::exists(at("a/steps.csv")));
  EXPECT_EQ(run("validate " + at("a/report.json")), 0) << out();
  EXPECT_NE(out().find("PASS"), std::string::npos);
  ASSERT_EQ(run("render " + at("a/report.json") + " --out " + at("a")), 0) << err();
  EXPECT_TRUE(fs::exists(at("a/trajectories.svg")));
  EXPECT_TRUE(fs::exists(at("a/w2.svg")));
  const json report = json::parse(read_file(at("a/report.json")));
  EXPECT_EQ(report["solution_hash"], drcs::sha256_hex(read_file(at("a/solution.json"))));
}

TEST_F(Cli, FixedSeedGivesByteIdenticalReports) {
  ASSERT_EQ(run("plan " + kScenario + " --out " + at("p")), 0) << err();
  const std::string sol = at("p/solution.json");
  ASSERT_EQ(run("simulate " + kScenario + " " + sol + " --seed 11 --threads 1 --out " + at("a")), 0) << err();
  ASSERT_EQ(run("simulate " + kScenario + " " + sol + " --seed 11 --threads 4 --out " + at("b")), 0) << err();
  ASSERT_EQ(run("simulate " + kScenario + " " + sol + " --seed 12 --out " + at("c")), 0) << err();
  EXPECT_EQ(read_file(at("a/report.json")), read_file(at("b/report.json")));
  EXPECT_NE(read_file(at("a/report.json")), read_file(at("c/report.json")));
}

TEST_F(Cli, AblationRaisesMaxW2) {
  ASSERT_EQ(run("plan " + kScenario + " --out " + at("p")), 0) << err();
  const std::string sol = at("p/solution.json");
  ASSERT_EQ(run("simulate " + kScenario + " " + sol + " --out " + at("on")), 0) << err();
  ASSERT_EQ(run("simulate " + kScenario + " " + sol + " --no-l1 --out " + at("off")), 0) << err();
  auto max_w2 = [&](const std::string& p) {
    const json report = json::parse(read_file(p));
    double m = 0.0;
    for (const auto& w : report["w2"]) m = std::max(m, w["true_nominal"].get<double>());
    return m;
  };
  EXPECT_GT(max_w2(at("off/report.json")), max_w2(at("on/report.json")));
  EXPECT_EQ(run("validate " + at("off/report.json")), 5) << out();
}

TEST_F(Cli, ExitCodes) {
  json j = small();
  j["safe_set"]["regions"][1]["faces"].push_back({{"c", {0, 1, 0, 0}}, {"d", 0}, {"sense", "ge"}});
  EXPECT_EQ(run("plan " + write_scenario(j, "empty_region.json") + " --out " + at("x")), 2);
  EXPECT_NE(err().find("safe_set"), std::string::npos) << err();

  EXPECT_EQ(run("plan " + at("missing.json")), 2);
  EXPECT_EQ(run("frobnicate"), 2);

  j = small();
  j["ambiguity"]["rho"] = 1000.0;
  EXPECT_EQ(run("plan " + write_scenario(j, "huge_rho.json") + " --out " + at("x")), 3);
  EXPECT_NE(err().find("region 0: face"), std::string::npos) << err();

  ASSERT_EQ(run("plan " + kScenario + " --out " + at("p")), 0) << err();
  const std::string sol = at("p/solution.json");
  EXPECT_EQ(run("simulate " + kScenario + " " + sol + " --paths 0 --out " + at("x")), 2);
  j = small();
  j["monte_carlo"]["seed"] = 8;
  EXPECT_EQ(run("simulate " + write_scenario(j, "other.json") + " " + sol + " --out " + at("x")), 2);
  EXPECT_NE(err().find("scenario_hash"), std::string::npos) << err();

  EXPECT_EQ(run("validate " + std::string(DRCS_TEST_DATA) + "/report_planted_violation.json"), 5);
  json bad = json::parse(read_file(std::string(DRCS_TEST_DATA) + "/report_planted_violation.json"));
  bad.erase("w2");
  drcs::write_file(at("no_w2.json"), bad.dump());
  EXPECT_EQ(run("validate " + at("no_w2.json")), 2);
  bad = json::parse(read_file(std::string(DRCS_TEST_DATA) + "/report_planted_violation.json"));
  bad["projection"] = {0, 7};
  drcs::write_file(at("bad_projection.json"), bad.dump());
  EXPECT_EQ(run("render " + at("bad_projection.json") + " --out " + at("x")), 2);
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  ASSERT_EQ(run("plan " + kScenario, "DRCS_OUT_DIR='" + at("env") + "'"), 0) << err();
  EXPECT_TRUE(fs::exists(at("env/solution.json")));
}
