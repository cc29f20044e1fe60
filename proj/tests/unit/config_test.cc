#include <gtest/gtest.h>

#include "config.h"
#include "fedleak/error.h"

using namespace fedleak;

namespace {

std::string error_of(const std::string& text) {
  try {
    cli::parse_config_text(text, "/base");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const auto cfg = cli::parse_config_text("{}", "/base");
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/base/out"));
  ASSERT_TRUE(cfg.network.has_value());
  EXPECT_EQ(cfg.net().input_shape(), (nn::Shape{64}));
  EXPECT_EQ(cfg.net().num_classes(), 4u);
  EXPECT_TRUE(std::holds_alternative<defense::NoDefense>(cfg.mechanism));
  EXPECT_FALSE(cfg.sweep.has_value());
  EXPECT_EQ(cfg.attack.batch_sizes, (std::vector<std::size_t>{1, 4, 8}));
}

TEST(Config, ParsesTheQuickConfig) {
  const auto cfg = cli::load_config(std::filesystem::path(FEDLEAK_FIXTURES) / "../../configs/quick.json");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.fed.clients, 4u);
  EXPECT_EQ(cfg.fed.rounds, 5u);
  ASSERT_TRUE(cfg.sweep.has_value());
  EXPECT_EQ(cfg.sweep->strengths.size(), 3u);
  EXPECT_EQ(defense::mechanism_name(cfg.sweep->mechanism), "dp");
  EXPECT_EQ(std::get<defense::DpNoise>(cfg.mechanism).sigma, 0.01);
  EXPECT_TRUE(std::holds_alternative<attack::Lbfgs>(cfg.attack.config.optimizer));
}

TEST(Config, MechanismVariants) {
  auto cfg = cli::parse_config_text(
      R"({"mechanism": {"kind": "spn", "alpha1": 0.5, "alpha2": 0.2, "margin": 2, "bits": 32}})", "/");
  const auto& spn = std::get<defense::SpnDefense>(cfg.mechanism).options;
  EXPECT_EQ(spn.alpha1, 0.5);
  EXPECT_EQ(spn.alpha2, 0.2);
  EXPECT_EQ(spn.margin, 2.0);
  EXPECT_EQ(spn.bits, 32u);
  cfg = cli::parse_config_text(R"({"mechanism": {"kind": "ppdl", "theta": 0.1}})", "/");
  EXPECT_EQ(std::get<defense::Ppdl>(cfg.mechanism).theta, 0.1);
  cfg = cli::parse_config_text(R"({"mechanism": {"kind": "dp", "family": "laplacian", "sigma": 1}})", "/");
  EXPECT_EQ(std::get<defense::DpNoise>(cfg.mechanism).family, defense::NoiseFamily::kLaplacian);
}

TEST(Config, ErrorsNameTheFieldPath) {
  EXPECT_EQ(error_of(R"({"fed": {"clients": -1}})").rfind("fed.clients", 0), 0u);
  EXPECT_EQ(error_of(R"({"fed": {"clients": "four"}})").rfind("fed.clients", 0), 0u);
  EXPECT_EQ(error_of(R"({"fed": {"optimizer": {"kind": "rmsprop"}}})").rfind("fed.optimizer.kind", 0), 0u);
  EXPECT_EQ(error_of(R"({"mechanism": {"kind": "dp", "sigma": -0.1}})").rfind("mechanism", 0), 0u);
  EXPECT_EQ(error_of(R"({"attack": {"kinds": ["reconstruction", "nope"]}})").rfind("attack.kinds[1]", 0), 0u);
  EXPECT_EQ(error_of(R"({"network": {"input_shape": [4], "layers": [{"type": "pool"}]}})")
                .rfind("network.layers[0].type", 0),
            0u);
  EXPECT_EQ(error_of(R"({"fed": {"bogus": 1}})").rfind("fed.bogus", 0), 0u);
  EXPECT_NE(error_of("{not json").find("JSON"), std::string::npos);
}

TEST(Config, NetworkMustFitTheDataset) {
  const auto msg = error_of(
      R"({"network": {"input_shape": [10], "layers": [{"type": "dense", "in": 10, "out": 4}]}})");
  EXPECT_FALSE(msg.empty());
}

TEST(Config, RelativePathsResolveAgainstTheConfig) {
  const auto cfg = cli::parse_config_text(
      R"({"output_dir": "res", "attack": {"transcript": "t.jsonl"}})", "/base/dir");
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/base/dir/res"));
  EXPECT_EQ(*cfg.attack.transcript, std::filesystem::path("/base/dir/t.jsonl"));
}
