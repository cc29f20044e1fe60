#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "fedleak/nn/losses.h"
#include "fedleak/nn/network.h"

namespace fedleak::nn {

// Hyper-parameters of a secret polarization head, shared by all clients.
struct SpnOptions {
  double alpha1 = 1.0;
  double alpha2 = 0.1;
  double margin = 1.0;
  std::size_t bits = 64;
};

// A client's private polarization head: a single identity-activated dense
// layer on the backbone feature vector plus one secret target code per class.
// None of it is ever shared.
struct SpnConfig {
  double alpha1 = 1.0;
  double alpha2 = 0.0;
  double margin = 1.0;
  std::size_t bits = 0;
  std::vector<Code> codes;  // codes[c] is the target for class c
  LayerTensors head;        // weight {bits, feature_dim}, bias {bits}

  // Throws ConfigError on negative weights, margin < 1, malformed or
  // duplicate codes, or head shapes that do not fit the network.
  void validate(std::size_t feature_dim, std::size_t num_classes) const;
};

// Draws distinct random codes and a uniform(-0.3, 0.3) head.
SpnConfig make_spn(const NetworkSpec& net, const SpnOptions& options, std::mt19937_64& rng);

}  // namespace fedleak::nn
