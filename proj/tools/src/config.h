#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/attack/iterative_attack.h"
#include "fedleak/defense/mechanism.h"
#include "fedleak/eval/ppc.h"
#include "fedleak/fed/fedsim.h"
#include "fedleak/nn/network.h"

namespace fedleak::cli {

struct DatasetBlock {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  std::size_t classes = 4;
  std::size_t per_class = 50;
  std::size_t test_per_class = 25;
  std::size_t side = 8;
  std::size_t channels = 1;
  std::filesystem::path images, labels, test_images, test_labels;
};

struct SweepBlock {
  defense::MechanismConfig mechanism = defense::DpNoise{};
  std::vector<double> strengths;
  std::vector<std::uint64_t> seeds{0};
};

struct AttackBlock {
  attack::AttackConfig config;
  std::vector<std::size_t> batch_sizes{1, 4, 8};
  std::vector<eval::AttackKind> kinds{eval::AttackKind::kReconstruction,
                                      eval::AttackKind::kMembership, eval::AttackKind::kTracing};
  bool analytic = true;  // also run the closed-form attack on batch-1 records
  std::optional<std::filesystem::path> transcript;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // sweep worker pool width
  std::filesystem::path output_dir = "out";
  DatasetBlock dataset;
  std::optional<nn::NetworkSpec> network;
  fed::FedConfig fed;
  defense::MechanismConfig mechanism = defense::NoDefense{};
  std::optional<SweepBlock> sweep;
  AttackBlock attack;
  eval::RegionThresholds regions;
  std::optional<std::filesystem::path> report_input;

  const nn::NetworkSpec& net() const { return *network; }
};

// Relative paths inside the config resolve against base_dir. Throws
// ConfigError whose message starts with the offending field path.
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace fedleak::cli
