#include <gtest/gtest.h>

#include "lnn/config.hpp"
#include "lnn/error.hpp"

namespace lnn {
namespace {

TEST(RunConfig, DefaultsAreComplete) {
  const RunConfig cfg;
  for (const std::string& key : RunConfig::known_keys()) EXPECT_NO_THROW(cfg.get(key)) << key;
  EXPECT_EQ(cfg.seed(), 1u);
  const ModelConfig m = cfg.model_config();
  EXPECT_EQ(m.n_classes, 3u);
  EXPECT_EQ(m.conv, default_conv_spec());
  EXPECT_EQ(m.liquid_init, LiquidInit{});
  EXPECT_EQ(cfg.wiring_spec(), WiringSpec{});
}

TEST(RunConfig, ParsesCommentsAndWhitespace) {
  const RunConfig cfg = RunConfig::from_text(
      "# comment\n"
      "  seed = 9   # trailing\n"
      "\n"
      "model.steps=4\n"
      "model.init_w = 0.1, 2\n");
  EXPECT_EQ(cfg.seed(), 9u);
  EXPECT_EQ(cfg.count("model.steps"), 4u);
  const ModelConfig m = cfg.model_config();
  EXPECT_EQ(m.liquid_init.w_lo, 0.1);
  EXPECT_EQ(m.liquid_init.w_hi, 2.0);
}

TEST(RunConfig, UnknownKeyNamed) {
  try {
    RunConfig::from_text("model.stepz = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'model.stepz'"), std::string::npos);
  }
  RunConfig cfg;
  EXPECT_THROW(cfg.apply_override("nope=1"), ConfigError);
  EXPECT_THROW(cfg.apply_override("seed"), ConfigError);
}

TEST(RunConfig, TypedAccessorsValidate) {
  RunConfig cfg;
  cfg.set("train.lr", "fast");
  EXPECT_THROW(cfg.real("train.lr"), ConfigError);
  cfg.set("train.epochs", "-3");
  EXPECT_THROW(cfg.count("train.epochs"), ConfigError);
  cfg.set("model.conv_pool", "maybe");
  EXPECT_THROW(cfg.flag("model.conv_pool"), ConfigError);
  cfg.set("model.init_gamma", "3");
  EXPECT_THROW(cfg.model_config(), ConfigError);
  cfg.set("model.init_gamma", "4, 1");
  cfg.set("model.conv_pool", "on");
  EXPECT_THROW(cfg.model_config(), ConfigError);
}

TEST(RunConfig, OverridesWinAndRoundTripThroughText) {
  RunConfig cfg = RunConfig::from_file(std::string(LNN_SOURCE_DIR) + "/configs/default.cfg");
  cfg.apply_override("train.epochs=2");
  cfg.apply_override("data.classes = 0, 1, 2, 5");
  EXPECT_EQ(cfg.count("train.epochs"), 2u);
  EXPECT_EQ(cfg.model_config().n_classes, 4u);
  const RunConfig again = RunConfig::from_text(cfg.to_text());
  for (const std::string& key : RunConfig::known_keys()) EXPECT_EQ(again.get(key), cfg.get(key)) << key;
}

TEST(RunConfig, ShippedConfigBuildsAModel) {
  const RunConfig cfg = RunConfig::from_file(std::string(LNN_SOURCE_DIR) + "/configs/default.cfg");
  const ModelConfig m = cfg.model_config();
  EXPECT_NO_THROW(build_model(m).validate());
  EXPECT_NO_THROW(cfg.chip_spec().validate());
  const TrainConfig t = cfg.train_config();
  EXPECT_LE(t.epochs, 15u);
  EXPECT_EQ(t.threads, 1u);
}

TEST(RunConfig, MissingFileIsIoError) {
  EXPECT_THROW(RunConfig::from_file("/nonexistent/run.cfg"), IoError);
}

}  // namespace
}  // namespace lnn
