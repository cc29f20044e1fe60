#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "config.h"
#include "fedleak/attack/iterative_attack.h"
#include "fedleak/data/dataset.h"
#include "fedleak/eval/ppc.h"
#include "fedleak/fed/transcript.h"

namespace fedleak::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> jobs;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides);

struct Datasets {
  data::Dataset train;
  data::Dataset test;
};

Datasets load_datasets(const ExperimentConfig& cfg);

struct AnalyticOutcome {
  double rmse = 0.0;
  double condition = 0.0;
  double bound = 0.0;
};

// The attacks run against one captured gradient record.
struct RecordAttack {
  std::size_t record = 0;  // index in the transcript
  std::size_t round = 0, step = 0, client = 0, batch_size = 0;
  std::string mechanism;
  double strength = 0.0;
  attack::AttackResult result;
  std::optional<attack::AttackReport> report;  // needs the evaluation section
  std::optional<double> ratio;                 // needs the evaluation section
  std::optional<AnalyticOutcome> analytic;
};

// Replays every gradient record whose batch size is listed in the attack
// block. Iterative attacks only see the attack view of each record; metrics
// read the evaluation section when present.
std::vector<RecordAttack> attack_transcript(const nn::NetworkSpec& net,
                                            const fed::GradientTranscript& transcript,
                                            const AttackBlock& block, std::uint64_t seed);

// Trains under one mechanism strength and attacks the captured steps:
// one result per attack kind and batch size.
std::vector<eval::SweepResult> run_trial(const ExperimentConfig& cfg, const Datasets& data,
                                         const defense::MechanismConfig& mechanism,
                                         std::uint64_t trial_seed);

void cmd_gen_data(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_attack(const ExperimentConfig& cfg);
void cmd_sweep(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

}  // namespace fedleak::cli
