#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fedleak/defense/mechanism.h"
#include "fedleak/nn/network.h"

namespace fedleak::attack {

struct Adam {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Lbfgs {
  std::size_t memory = 10;
  std::size_t max_line_search = 30;
};

using Optimizer = std::variant<Adam, Lbfgs>;

// Per-channel linear ramp over [0.25, 0.75] plus uniform noise of the given
// amplitude.
struct PatternRamp {
  double noise = 0.05;
};

struct UniformNoise {
  double lo = 0.0;
  double hi = 1.0;
};

using InitScheme = std::variant<PatternRamp, UniformNoise>;

struct NestedReverse {};

struct FiniteDifference {
  double h = 1e-4;
};

using MatchGradient = std::variant<NestedReverse, FiniteDifference>;

struct AttackConfig {
  std::size_t max_iters = 300;
  Optimizer optimizer = Lbfgs{};
  InitScheme init = PatternRamp{};
  MatchGradient gradient = NestedReverse{};
  double tol = 1e-12;  // stop once the match loss drops below this
  std::uint64_t seed = 0;

  void validate() const;
};

// Optional explicit starting point; replaces the init scheme.
struct AttackStart {
  std::vector<nn::Tensor> inputs;
  std::vector<std::vector<double>> label_logits;
};

struct AttackResult {
  std::vector<nn::Tensor> inputs;  // clamped to [0, 1]
  std::vector<std::size_t> labels;  // argmax of the label logits
  std::vector<double> trajectory;   // match loss at the start and after every iteration
  std::size_t iterations = 0;
  double loss = 0.0;  // match loss of the returned iterate (before clamping)
  bool converged = false;
  bool diverged = false;
};

// Initial dummy inputs and label logits for a batch, as flat variables.
std::vector<double> initial_variables(const nn::NetworkSpec& net, std::size_t batch_size,
                                      const AttackConfig& cfg);

// Gradient-matching reconstruction of a batch from an observed shared update,
// using only the public network and parameters.
AttackResult iterative_reconstruct(const nn::NetworkSpec& net, const nn::Params& public_params,
                                   const defense::SharedUpdate& observed, std::size_t batch_size,
                                   const AttackConfig& cfg,
                                   const std::optional<AttackStart>& start = std::nullopt);

struct AttackReport {
  AttackResult result;
  std::vector<std::size_t> assignment;  // assignment[r] = truth index matched to item r
  std::vector<double> item_rmse;        // per reconstructed item, against its match
  double rmse = 0.0;                    // mean of item_rmse
  double membership = 0.0;              // label mismatch rate under the assignment
  std::optional<double> condition;
  std::optional<double> bound;
};

// Pairs reconstructions with ground truth greedily by smallest rMSE and
// scores the attack.
AttackReport score_attack(AttackResult result, std::span<const nn::Tensor> truth,
                          std::span<const std::size_t> truth_labels);

}  // namespace fedleak::attack
