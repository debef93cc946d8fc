#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "advrat/errors.hpp"
#include "advrat/pipeline.hpp"

using namespace advrat;

namespace {

RunConfig tiny() {
  return RunConfig::from_json(R"({
    "seed": 3,
    "resources": {"train_instances": 60, "test_instances": 20},
    "attack": {"copies": 2},
    "regime": {"lambda2_grid": [0.0, 0.1], "joint_grid": [true]},
    "hyper": {"embed_dim": 4, "max_epochs": 2, "min_epochs": 1}
  })");
}

std::string message_of(const std::string& json) {
  try {
    RunConfig::from_json(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsAndOverrides) {
  const auto c = tiny();
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.resources.train_instances, 60u);
  EXPECT_EQ(c.attack.copies, 2u);
  EXPECT_EQ(c.hyper.embed_dim, 4u);
  EXPECT_EQ(c.hyper.batch_size, 8u);
  EXPECT_EQ(c.regime.name, "no_adv");
}

TEST(RunConfig, FieldLevelErrors) {
  EXPECT_NE(message_of(R"({"hyper": {"lr": 1}})").find("hyper.lr: unknown key"), std::string::npos);
  EXPECT_NE(message_of(R"({"extra": 1})").find("extra: unknown key"), std::string::npos);
  EXPECT_NE(message_of(R"({"hyper": {"lambda2": "big"}})").find("hyper.lambda2"), std::string::npos);
  EXPECT_NE(message_of(R"({"regime": {"name": "wild"}})").find("regime.name"), std::string::npos);
  EXPECT_NE(message_of(R"({"resources": {"synth": {"entity_pairs": 1}}})").find("resources.synth"),
            std::string::npos);
  EXPECT_NE(message_of(R"({"seed": -1})").find("seed"), std::string::npos);
  EXPECT_NE(message_of("{not json").find("invalid JSON"), std::string::npos);
  EXPECT_NE(message_of(R"({"hyper": {"batch_size": 0}})").find("hyper.batch_size"), std::string::npos);
}

TEST(RunConfig, RoundTripAndHash) {
  const auto c = tiny();
  const auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  auto reseeded = c;
  reseeded.seed = 99;
  EXPECT_EQ(reseeded.hash(), c.hash());
  auto changed = c;
  changed.hyper.lambda1 = 2.0;
  EXPECT_NE(changed.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(RunConfig, SidecarRecordsSeedAndHash) {
  const auto c = tiny();
  const auto path = std::filesystem::temp_directory_path() / "advrat_sidecar.jsonl";
  std::ofstream(path) << "\n";
  write_sidecar(path, c, "corpus");
  std::ifstream in(path.string() + ".meta.json");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_NE(ss.str().find("\"seed\": 3"), std::string::npos);
  EXPECT_NE(ss.str().find(c.hash()), std::string::npos);
}

TEST(Repro, TinyRunIsDeterministic) {
  const auto c = tiny();
  const auto a = repro(c);
  const auto b = repro(c);
  EXPECT_EQ(a.json, b.json);
  EXPECT_EQ(a.table, b.table);
  ASSERT_EQ(a.report.rows.size(), 6u);
  EXPECT_EQ(a.report.rows[2].regime, "adv_2x");
  for (const auto& row : a.report.rows) {
    ASSERT_TRUE(row.training);
    EXPECT_EQ(row.training->skipped, 0u);
  }
  EXPECT_NE(a.json.find(c.hash()), std::string::npos);
  // The effective config is echoed into the report.
  EXPECT_NE(a.json.find("\"lambda2_grid\""), std::string::npos);
}
