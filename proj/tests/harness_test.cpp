// Copyright 2026 The QRE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "qre/harness.hpp"

namespace qre::harness {
namespace {

namespace fs = std::filesystem;

TEST(Config, CoercionFollowsTheDefaultType) {
  EXPECT_EQ(detail::coerce("7", 1, "n"), 7);
  EXPECT_DOUBLE_EQ(detail::coerce("0.25", 0.5, "p").get<double>(), 0.25);
  EXPECT_EQ(detail::coerce("true", false, "qec"), true);
  EXPECT_EQ(detail::coerce("\"kl\"", "ns", "loss"), "kl");
  EXPECT_EQ(detail::coerce("[4, 6]", Json::array({1}), "n"), Json::array({4, 6}));
  EXPECT_EQ(detail::coerce("2..8:3", Json::array({1}), "n"), Json::array({2, 5, 8}));
  EXPECT_EQ(detail::coerce("4..6", Json::array({1}), "n"), Json::array({4, 5, 6}));
  EXPECT_EQ(detail::coerce("0.1,0.2", Json::array({0.5}), "p"), Json::array({0.1, 0.2}));
}

TEST(Config, BadValuesAreConfigErrors) {
  EXPECT_THROW(detail::coerce("seven", 1, "n"), ConfigError);
  EXPECT_THROW(detail::coerce("1.5", 1, "n"), ConfigError);
  EXPECT_THROW(detail::coerce("yes", false, "qec"), ConfigError);
  EXPECT_THROW(detail::coerce("6..4", Json::array({1}), "n"), ConfigError);
  EXPECT_THROW(detail::coerce("0.1..0.5", Json::array({0.5}), "p"), ConfigError);
  EXPECT_THROW(detail::coerce("1,,2", Json::array({1}), "n"), ConfigError);
}

TEST(Config, StrictFileParsing) {
  const auto raw = parse_config_text("# comment\n[qdp]\nn = 3  # trailing\npairs = 10\n");
  EXPECT_EQ(raw.at("qdp").at("n"), "3");
  EXPECT_THROW(parse_config_text("[qdp]\nfoo = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[nope]\nn = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[qdp]\nn = 1\nn = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("n = 1\n"), ConfigError);
  try {
    parse_config_text("[qdp]\n\nfoo = 1\n");
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, PrecedenceIsDefaultsThenFileThenOverrides) {
  const auto file = parse_config_text("[qdp]\nn = 3\npairs = 10\n");
  const auto cfg = resolve_config("qdp", file, {{"pairs", "20"}});
  EXPECT_EQ(cfg.at("n"), 3);
  EXPECT_EQ(cfg.at("pairs"), 20);
  EXPECT_EQ(cfg.at("seed"), 1);
  EXPECT_THROW(resolve_config("qdp", {}, {{"bogus", "1"}}), ConfigError);
}

TEST(Config, EveryCommandHasASchemaAndAnImplementation) {
  ASSERT_EQ(schemas().size(), 10u);
  for (const auto &s : schemas()) {
    EXPECT_TRUE(commands().count(s.command)) << s.command;
    EXPECT_NO_THROW(resolve_config(s.command, {}, {})) << s.command;
  }
}

TEST(Config, HashIsStableAndSensitive) {
  const auto a = resolve_config("qec-sim", {}, {});
  EXPECT_EQ(config_hash("qec-sim", a), config_hash("qec-sim", resolve_config("qec-sim", {}, {})));
  EXPECT_EQ(config_hash("qec-sim", a).size(), 16u);
  EXPECT_NE(config_hash("qec-sim", a), config_hash("qec-sim", resolve_config("qec-sim", {}, {{"seed", "2"}})));
  EXPECT_NE(config_hash("qec-sim", a), config_hash("qdp", a));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Csv, QuotingAndLineEndings) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  Table t("t", {"x", "y"});
  t.add(1, 0.5);
  t.add(std::string("q,r"), std::numeric_limits<double>::quiet_NaN());
  EXPECT_EQ(to_csv(t), "x,y\r\n1,0.5\r\n\"q,r\",\r\n");
  EXPECT_THROW(t.add(1), std::exception);
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3, 6.02e23, -2.5e-300}) EXPECT_EQ(std::stod(fmt(v)), v);
}

class ExecuteTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("qre-harness-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
  }
  void TearDown() override { fs::remove_all(root); }

  Outcome run(const std::string &cmd, std::map<std::string, std::string> ov, bool force = false, bool check = false) {
    Options opt;
    opt.command = cmd;
    opt.overrides = std::move(ov);
    opt.out_root = root.string();
    opt.force = force;
    opt.check = check;
    std::ostringstream log;
    return execute(opt, log);
  }

  fs::path root;
};

TEST_F(ExecuteTest, WritesTablesSidecarsAndRunRecord) {
  const auto out = run("qec-sim", {{"trials", "1000"}, {"p", "0.1"}});
  ASSERT_EQ(out.code, kOk) << out.message;
  EXPECT_TRUE(fs::exists(out.dir / "qec_sim.csv"));
  EXPECT_TRUE(fs::exists(out.dir / "qec_sim.gp"));
  EXPECT_TRUE(fs::exists(out.dir / "run.json"));
  std::ifstream is(out.dir / "qec_sim.json");
  const auto side = Json::parse(is);
  EXPECT_EQ(side.at("config").at("trials"), 1000);
  EXPECT_EQ(out.dir.filename().string(), "qec-sim-" + side.at("config_hash").get<std::string>());
}

TEST_F(ExecuteTest, ExitCodes) {
  const auto bad = run("qec-sim", {{"trials", "many"}});
  EXPECT_EQ(bad.code, kConfigError);
  EXPECT_FALSE(fs::exists(root));

  const std::map<std::string, std::string> ov = {{"trials", "1000"}};
  EXPECT_EQ(run("qec-sim", ov).code, kOk);
  EXPECT_EQ(run("qec-sim", ov).code, kConfigError);
  EXPECT_EQ(run("qec-sim", ov, true).code, kOk);

  const auto invalid = run("qec-sim", {{"p", "1.5"}});
  EXPECT_EQ(invalid.code, kConfigError);
  EXPECT_TRUE(fs::exists(invalid.dir / "FAILED"));

  EXPECT_EQ(run("qdp", {{"p0", "0"}, {"pairs", "10"}, {"n", "2"}}).code, kConfigError);
}

TEST_F(ExecuteTest, RerunsAreByteIdentical) {
  const std::map<std::string, std::string> ov = {{"n", "2..4:2"}, {"samples", "50"}, {"classifier", "random"}};
  const auto a = run("grad-stats", ov);
  ASSERT_EQ(a.code, kOk) << a.message;
  std::ifstream ia(a.dir / "grad_stats.csv", std::ios::binary);
  const std::string first((std::istreambuf_iterator<char>(ia)), {});
  ASSERT_EQ(run("grad-stats", ov, true).code, kOk);
  std::ifstream ib(a.dir / "grad_stats.csv", std::ios::binary);
  EXPECT_EQ(first, std::string((std::istreambuf_iterator<char>(ib)), {}));
}

}  // namespace
}  // namespace qre::harness
