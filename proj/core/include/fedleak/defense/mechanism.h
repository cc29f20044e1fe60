#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedleak/nn/engine.h"
#include "fedleak/nn/network.h"
#include "fedleak/nn/spn.h"

namespace fedleak::defense {

enum class NoiseFamily { kGaussian, kLaplacian };

std::string_view to_string(NoiseFamily family);
NoiseFamily parse_noise_family(std::string_view name);

struct NoDefense {};

struct DpNoise {
  NoiseFamily family = NoiseFamily::kGaussian;
  double sigma = 0.0;
};

// Share only the largest-magnitude fraction `theta` of each tensor, optionally
// followed by noise of scale `sigma` on the transmitted entries.
struct Ppdl {
  double theta = 1.0;
  double sigma = 0.0;
  NoiseFamily family = NoiseFamily::kGaussian;
};

struct SpnDefense {
  nn::SpnOptions options;
};

using MechanismConfig = std::variant<NoDefense, DpNoise, Ppdl, SpnDefense>;

// "none", "dp", "ppdl" or "spn".
std::string mechanism_name(const MechanismConfig& mechanism);
// sigma for DP, theta for PPDL, alpha2 for SPN, 0 for none.
double mechanism_strength(const MechanismConfig& mechanism);
// Same mechanism kind with its controlling parameter replaced.
MechanismConfig with_strength(const MechanismConfig& mechanism, double strength);
void validate(const MechanismConfig& mechanism);

// Transmission mask of one layer; an empty vector means every entry is sent.
struct LayerMask {
  std::vector<std::uint8_t> weight;
  std::vector<std::uint8_t> bias;

  bool operator==(const LayerMask&) const = default;
};

// What a client actually puts on the wire: a gradient or parameter delta of
// the public network only. Masked-out entries are exactly zero.
struct SharedUpdate {
  nn::GradientVector gradients;
  std::vector<LayerMask> mask;  // empty, or one entry per layer
  std::string mechanism = "none";
  double strength = 0.0;
  std::size_t step = 0;

  bool has_mask() const { return !mask.empty(); }
  bool operator==(const SharedUpdate&) const = default;
};

nn::GradientVector apply_dp_noise(const nn::GradientVector& grads, NoiseFamily family,
                                  double sigma, std::mt19937_64& rng);

// Keeps the ceil(theta * n) largest-|g| entries of every weight and bias
// tensor; ties go to the lower index.
SharedUpdate apply_ppdl(const nn::GradientVector& grads, double theta);

// Composite-loss batch gradient with the private head's gradient stripped.
SharedUpdate spn_shared_gradients(const nn::NetworkSpec& net, const nn::Params& params,
                                  std::span<const nn::Tensor> inputs,
                                  std::span<const std::size_t> labels, const nn::SpnConfig& spn);

// Applies the mechanism to an outgoing gradient or delta. SPN updates pass
// through unchanged since their perturbation is already part of the gradient.
SharedUpdate defend_update(const nn::GradientVector& update, const MechanismConfig& mechanism,
                           std::mt19937_64& rng);

struct DefendedStep {
  SharedUpdate shared;
  nn::GradientVector clean;  // plain cross-entropy gradient of the same batch
};

// The step gradient a client running `mechanism` shares for one batch.
// `spn` must be given for SpnDefense.
DefendedStep defended_step(const nn::NetworkSpec& net, const nn::Params& params,
                           std::span<const nn::Tensor> inputs, std::span<const std::size_t> labels,
                           const MechanismConfig& mechanism, const nn::SpnConfig* spn,
                           std::mt19937_64& rng);

struct PerturbationRatio {
  double ratio = 0.0;   // ||B_I|| / ||E_B||, +inf when E_B == 0
  double x_axis = 0.0;  // log10(ratio + 1)
};

// Compares bias gradients of the first trainable layer. Throws
// DegenerateSystemError when the clean bias gradient is all zero.
PerturbationRatio perturbation_ratio(const nn::GradientVector& clean,
                                     const nn::GradientVector& defended,
                                     const nn::NetworkSpec& net);

}  // namespace fedleak::defense
