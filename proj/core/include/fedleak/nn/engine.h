#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedleak/nn/network.h"
#include "fedleak/nn/spn.h"
#include "fedleak/nn/tensor.h"

namespace fedleak::nn {

// Intermediate values of one forward pass. inputs[0] is the network input;
// pre_activations[i] is empty for Flatten layers.
struct ForwardTrace {
  std::vector<Tensor> inputs;
  std::vector<Tensor> pre_activations;
  std::vector<Tensor> outputs;
};

struct ForwardResult {
  Tensor logits;                // u, one entry per class
  std::optional<Tensor> codes;  // v, present when an SPN head is attached
  ForwardTrace trace;
};

// Runs the backbone and public head, and the private head when spn != nullptr.
ForwardResult forward(const NetworkSpec& net, const Params& params, const Tensor& x,
                      const SpnConfig* spn = nullptr);

// Exact gradient of the (composite, when spn != nullptr) loss of a single
// example with respect to every parameter.
GradientVector backward(const NetworkSpec& net, const Params& params,
                        const ForwardResult& result, std::size_t label,
                        const SpnConfig* spn = nullptr);

double example_loss(const ForwardResult& result, std::size_t label, const SpnConfig* spn);

struct BatchGradient {
  GradientVector gradient;  // mean over the batch
  double loss = 0.0;        // mean over the batch
};

BatchGradient batch_gradient(const NetworkSpec& net, const Params& params,
                             std::span<const Tensor> inputs, std::span<const std::size_t> labels,
                             const SpnConfig* spn = nullptr);

std::size_t predict(const NetworkSpec& net, const Params& params, const Tensor& x);

}  // namespace fedleak::nn
