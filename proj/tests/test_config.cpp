#include <gtest/gtest.h>

#include "bcareid/config.hpp"
#include "bcareid/errors.hpp"

namespace bcareid {
namespace {

std::string error_of(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, Defaults) {
  RunConfig c;
  EXPECT_EQ(c.branch.epochs, 60);
  EXPECT_EQ(c.branch.base_rate, 3e-4);
  EXPECT_EQ(c.branch.p, 16);
  EXPECT_EQ(c.branch.k, 4);
  EXPECT_EQ(c.branch.margin_dr, 0.3);
  EXPECT_TRUE(c.branch.bias_hinge);
  EXPECT_EQ(c.probe.epochs, 200);
  EXPECT_EQ(c.generator.n_ids, 100);
}

TEST(Config, ParsesKeys) {
  auto c = parse_run_config(
      "# comment\n"
      "seed = 9\n"
      "channels = pose, camera\n"
      "camera.classes = 6\n"
      "pose.gain = 0.5\n"
      "mode = enhance\n"
      "lambda_db = 0.2\n"
      "bias_hinge = off\n"
      "hidden = 32,16\n");
  EXPECT_EQ(c.seed, 9u);
  ASSERT_EQ(c.generator.channels.size(), 2u);
  EXPECT_EQ(c.generator.channels[1].classes, 6);
  EXPECT_EQ(c.generator.channels[0].gain, 0.5);
  EXPECT_EQ(c.branch.mode, BranchMode::kEnhance);
  EXPECT_EQ(c.branch.lambda_db, 0.2);
  EXPECT_FALSE(c.branch.bias_hinge);
  EXPECT_EQ(c.branch.hidden, (std::vector<int>{32, 16}));
}

TEST(Config, ClosedWorld) {
  EXPECT_NE(error_of("epoch = 3\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\nseed = 2\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("epochs = many\n"), "");
  EXPECT_NE(error_of("mode = sideways\n"), "");
  EXPECT_NE(error_of("just text\n"), "");
  EXPECT_NE(error_of("shoe.classes = 3\n"), "");
}

TEST(Config, FormatRoundTrip) {
  auto c = preset("preset-cam6");
  c.branch.lambda_db = 0.125;
  auto text = format_run_config(c);
  EXPECT_EQ(format_run_config(parse_run_config(text)), text);
}

TEST(Config, HelpListsEveryKey) {
  auto help = config_key_help();
  auto text = format_run_config(preset("preset-part3"));
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    auto key = line.substr(0, line.find(' '));
    if (key.find('.') != std::string::npos) key = "<channel>" + key.substr(key.find('.'));
    EXPECT_NE(help.find(key), std::string::npos) << key;
  }
}

TEST(Config, Presets) {
  for (const auto& name : preset_names()) {
    auto c = preset(name);
    EXPECT_EQ(c.branch.p, 8) << name;
    EXPECT_EQ(c.branch.k, 4) << name;
    EXPECT_NO_THROW(c.branch.validate());
  }
  EXPECT_EQ(preset("preset-cam6").generator.channels[0].name, "camera");
  EXPECT_EQ(preset("preset-part3").generator.channels[0].classes, 3);
  EXPECT_THROW(preset("preset-nope"), ConfigError);
}

TEST(Config, OverridesOnTopOfPreset) {
  auto c = parse_run_config("epochs = 7\n", preset("preset-pose2"));
  EXPECT_EQ(c.branch.epochs, 7);
  EXPECT_EQ(c.branch.bias_channel, "pose");
}

}  // namespace
}  // namespace bcareid
