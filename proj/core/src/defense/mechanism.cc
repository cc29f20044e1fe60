#include "fedleak/defense/mechanism.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedleak/error.h"

namespace fedleak::defense {

std::string_view to_string(NoiseFamily family) {
  return family == NoiseFamily::kLaplacian ? "laplacian" : "gaussian";
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::kGaussian;
  if (name == "laplacian" || name == "laplace") return NoiseFamily::kLaplacian;
  throw ConfigError("unknown noise family '" + std::string(name) + "'");
}

std::string mechanism_name(const MechanismConfig& mechanism) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DpNoise>) return "dp";
        if constexpr (std::is_same_v<T, Ppdl>) return "ppdl";
        if constexpr (std::is_same_v<T, SpnDefense>) return "spn";
        return "none";
      },
      mechanism);
}

double mechanism_strength(const MechanismConfig& mechanism) {
  if (const auto* dp = std::get_if<DpNoise>(&mechanism)) return dp->sigma;
  if (const auto* p = std::get_if<Ppdl>(&mechanism)) return p->theta;
  if (const auto* s = std::get_if<SpnDefense>(&mechanism)) return s->options.alpha2;
  return 0.0;
}

MechanismConfig with_strength(const MechanismConfig& mechanism, double strength) {
  MechanismConfig out = mechanism;
  if (auto* dp = std::get_if<DpNoise>(&out)) dp->sigma = strength;
  if (auto* p = std::get_if<Ppdl>(&out)) p->theta = strength;
  if (auto* s = std::get_if<SpnDefense>(&out)) s->options.alpha2 = strength;
  validate(out);
  return out;
}

void validate(const MechanismConfig& mechanism) {
  if (const auto* dp = std::get_if<DpNoise>(&mechanism)) {
    if (!(dp->sigma >= 0.0)) throw ConfigError("DP noise sigma must be >= 0");
  }
  if (const auto* p = std::get_if<Ppdl>(&mechanism)) {
    if (!(p->theta > 0.0 && p->theta <= 1.0)) throw ConfigError("PPDL theta must lie in (0, 1]");
    if (!(p->sigma >= 0.0)) throw ConfigError("PPDL noise sigma must be >= 0");
  }
  if (const auto* s = std::get_if<SpnDefense>(&mechanism)) {
    const auto& o = s->options;
    if (!(o.alpha1 >= 0.0) || !(o.alpha2 >= 0.0)) throw ConfigError("SPN alphas must be >= 0");
    if (!(o.margin >= 1.0)) throw ConfigError("SPN margin must be >= 1");
    if (o.bits == 0) throw ConfigError("SPN needs at least one bit");
  }
}

namespace {

template <typename Fn>
void for_each_tensor(nn::GradientVector& g, Fn&& fn) {
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    fn(i, false, g.layers[i].weight);
    fn(i, true, g.layers[i].bias);
  }
}

double sample_noise(NoiseFamily family, double sigma, std::mt19937_64& rng) {
  if (family == NoiseFamily::kLaplacian) {
    std::exponential_distribution<double> expo(1.0);
    return sigma * (expo(rng) - expo(rng));
  }
  std::normal_distribution<double> normal(0.0, sigma);
  return normal(rng);
}

}  // namespace

nn::GradientVector apply_dp_noise(const nn::GradientVector& grads, NoiseFamily family,
                                  double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("DP noise sigma must be >= 0");
  nn::GradientVector out = grads;
  out.private_head.reset();
  if (sigma == 0.0) return out;
  for_each_tensor(out, [&](std::size_t, bool, nn::Tensor& t) {
    for (double& v : t.values()) v += sample_noise(family, sigma, rng);
  });
  return out;
}

namespace {

std::vector<std::uint8_t> top_k_mask(std::span<const double> values, double theta) {
  const std::size_t n = values.size();
  const auto keep = static_cast<std::size_t>(std::ceil(theta * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k = 0; k < std::min(keep, n); ++k) mask[order[k]] = 1;
  return mask;
}

}  // namespace

SharedUpdate apply_ppdl(const nn::GradientVector& grads, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("PPDL theta must lie in (0, 1]");
  SharedUpdate out;
  out.gradients = grads;
  out.gradients.private_head.reset();
  out.mechanism = "ppdl";
  out.strength = theta;
  out.mask.resize(grads.layers.size());
  for_each_tensor(out.gradients, [&](std::size_t i, bool is_bias, nn::Tensor& t) {
    auto mask = top_k_mask(t.values(), theta);
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!mask[k]) t[k] = 0.0;
    }
    (is_bias ? out.mask[i].bias : out.mask[i].weight) = std::move(mask);
  });
  return out;
}

SharedUpdate spn_shared_gradients(const nn::NetworkSpec& net, const nn::Params& params,
                                  std::span<const nn::Tensor> inputs,
                                  std::span<const std::size_t> labels, const nn::SpnConfig& spn) {
  if (spn.head.weight.empty()) throw ConfigError("SPN private head parameters are missing");
  SharedUpdate out;
  out.gradients = nn::batch_gradient(net, params, inputs, labels, &spn).gradient;
  out.gradients.private_head.reset();
  out.mechanism = "spn";
  out.strength = spn.alpha2;
  return out;
}

SharedUpdate defend_update(const nn::GradientVector& update, const MechanismConfig& mechanism,
                           std::mt19937_64& rng) {
  validate(mechanism);
  SharedUpdate out;
  if (const auto* dp = std::get_if<DpNoise>(&mechanism)) {
    out.gradients = apply_dp_noise(update, dp->family, dp->sigma, rng);
  } else if (const auto* p = std::get_if<Ppdl>(&mechanism)) {
    out = apply_ppdl(update, p->theta);
    if (p->sigma > 0.0) {
      for_each_tensor(out.gradients, [&](std::size_t i, bool is_bias, nn::Tensor& t) {
        const auto& mask = is_bias ? out.mask[i].bias : out.mask[i].weight;
        for (std::size_t k = 0; k < t.size(); ++k) {
          if (mask[k]) t[k] += sample_noise(p->family, p->sigma, rng);
        }
      });
    }
  } else {
    out.gradients = update;
    out.gradients.private_head.reset();
  }
  out.mechanism = mechanism_name(mechanism);
  out.strength = mechanism_strength(mechanism);
  return out;
}

DefendedStep defended_step(const nn::NetworkSpec& net, const nn::Params& params,
                           std::span<const nn::Tensor> inputs, std::span<const std::size_t> labels,
                           const MechanismConfig& mechanism, const nn::SpnConfig* spn,
                           std::mt19937_64& rng) {
  DefendedStep step;
  step.clean = nn::batch_gradient(net, params, inputs, labels).gradient;
  if (std::holds_alternative<SpnDefense>(mechanism)) {
    if (spn == nullptr) throw ConfigError("SPN mechanism needs the client's private head");
    step.shared = spn_shared_gradients(net, params, inputs, labels, *spn);
  } else {
    step.shared = defend_update(step.clean, mechanism, rng);
  }
  return step;
}

PerturbationRatio perturbation_ratio(const nn::GradientVector& clean,
                                     const nn::GradientVector& defended,
                                     const nn::NetworkSpec& net) {
  if (!nn::congruent(clean, defended)) throw ConfigError("gradients are not congruent");
  const std::size_t layer = net.first_trainable_layer();
  if (layer >= clean.layers.size()) throw ConfigError("gradient has no trainable layer");
  const nn::Tensor& b = clean.layers[layer].bias;
  const nn::Tensor& bd = defended.layers[layer].bias;
  const double signal = b.norm();
  if (signal == 0.0) {
    throw DegenerateSystemError("clean bias gradient of the first trainable layer is zero");
  }
  double err = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) err += (bd[k] - b[k]) * (bd[k] - b[k]);
  err = std::sqrt(err);
  PerturbationRatio r;
  r.ratio = err == 0.0 ? std::numeric_limits<double>::infinity() : signal / err;
  r.x_axis = std::log10(r.ratio + 1.0);
  return r;
}

}  // namespace fedleak::defense
