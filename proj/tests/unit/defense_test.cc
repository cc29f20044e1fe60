#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedleak/defense/mechanism.h"
#include "fedleak/error.h"
#include "fedleak/nn/engine.h"

using namespace fedleak;
using defense::NoiseFamily;

namespace {

nn::GradientVector filled(std::size_t n, double v) {
  nn::GradientVector g;
  g.layers.push_back({nn::Tensor({n, 1}, std::vector<double>(n, v)), nn::Tensor::vector({v})});
  return g;
}

struct Fixture {
  nn::NetworkSpec net{{6}, {nn::Dense{6, 5, nn::Activation::kSigmoid}, nn::Dense{5, 3}}};
  nn::Params params;
  std::vector<nn::Tensor> xs;
  std::vector<std::size_t> ys;

  explicit Fixture(std::uint64_t seed, std::size_t batch = 3, bool one_class = false) {
    std::mt19937_64 rng(seed);
    params = nn::init_params(net, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < batch; ++i) {
      nn::Tensor x({6});
      for (auto& v : x.values()) v = u(rng);
      xs.push_back(x);
      ys.push_back(one_class ? 1 : i % 3);
    }
  }
};

double sample_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

TEST(DpNoise, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(1);
  const auto g = filled(10, 0.25);
  EXPECT_EQ(defense::apply_dp_noise(g, NoiseFamily::kGaussian, 0.0, rng), g);
  EXPECT_THROW(defense::apply_dp_noise(g, NoiseFamily::kGaussian, -1.0, rng), ConfigError);
}

TEST(DpNoise, GaussianStandardDeviation) {
  std::mt19937_64 rng(2);
  const auto out = defense::apply_dp_noise(filled(40000, 0.0), NoiseFamily::kGaussian, 0.3, rng);
  EXPECT_NEAR(sample_std(out.layers[0].weight.data()), 0.3, 0.3 * 0.05);
}

TEST(DpNoise, LaplaceStandardDeviation) {
  std::mt19937_64 rng(3);
  const auto out = defense::apply_dp_noise(filled(40000, 0.0), NoiseFamily::kLaplacian, 0.3, rng);
  EXPECT_NEAR(sample_std(out.layers[0].weight.data()), 0.3 * std::sqrt(2.0), 0.3 * std::sqrt(2.0) * 0.05);
}

TEST(Ppdl, KeepsLargestMagnitudes) {
  nn::GradientVector g;
  g.layers.push_back({nn::Tensor({2, 2}, {0.1, -0.9, 0.5, 0.2}), nn::Tensor::vector({3, -4})});
  const auto half = defense::apply_ppdl(g, 0.5);
  EXPECT_EQ(half.gradients.layers[0].weight.data(), (std::vector<double>{0, -0.9, 0.5, 0}));
  EXPECT_EQ(half.gradients.layers[0].bias.data(), (std::vector<double>{0, -4}));
  EXPECT_EQ(half.mask[0].weight, (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(half.mask[0].bias, (std::vector<std::uint8_t>{0, 1}));
  const auto all = defense::apply_ppdl(g, 1.0);
  EXPECT_EQ(all.gradients, g);
  EXPECT_THROW(defense::apply_ppdl(g, 0.0), ConfigError);
  EXPECT_THROW(defense::apply_ppdl(g, 1.5), ConfigError);
}

TEST(Ppdl, TiesGoToLowerIndex) {
  nn::GradientVector g;
  g.layers.push_back({nn::Tensor({1, 4}, {1, -1, 1, 1}), nn::Tensor::vector({0})});
  const auto out = defense::apply_ppdl(g, 0.5);
  EXPECT_EQ(out.mask[0].weight, (std::vector<std::uint8_t>{1, 1, 0, 0}));
}

TEST(Ppdl, SurvivorCountIsCeilOfThetaN) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double theta : {0.01, 0.1, 0.33, 0.5, 0.77, 1.0}) {
    nn::GradientVector g;
    g.layers.push_back({nn::Tensor({7, 13}), nn::Tensor({7})});
    for (auto& v : g.layers[0].weight.values()) v = n(rng);
    for (auto& v : g.layers[0].bias.values()) v = n(rng);
    const auto out = defense::apply_ppdl(g, theta);
    std::size_t kept = 0;
    for (auto m : out.mask[0].weight) kept += m;
    EXPECT_EQ(kept, static_cast<std::size_t>(std::ceil(theta * 91 - 1e-9))) << theta;
  }
}

TEST(Ppdl, NoiseOnlyOnTransmittedEntries) {
  std::mt19937_64 rng(5);
  const auto g = filled(100, 1.0);
  auto out = defense::defend_update(g, defense::Ppdl{0.3, 0.5, NoiseFamily::kGaussian}, rng);
  std::size_t noisy = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    if (out.mask[0].weight[k]) {
      noisy += out.gradients.layers[0].weight[k] != 1.0;
    } else {
      EXPECT_EQ(out.gradients.layers[0].weight[k], 0.0);
    }
  }
  EXPECT_EQ(noisy, 30u);
}

TEST(Spn, SharedGradientIsLinearInTheWeights) {
  Fixture f(6);
  std::mt19937_64 rng(7);
  auto spn = nn::make_spn(f.net, {0.7, 0.4, 2.0, 12}, rng);
  const auto mixed = defense::spn_shared_gradients(f.net, f.params, f.xs, f.ys, spn);
  auto ce_only = spn;
  ce_only.alpha1 = 1.0;
  ce_only.alpha2 = 0.0;
  auto pol_only = spn;
  pol_only.alpha1 = 0.0;
  pol_only.alpha2 = 1.0;
  const auto a = nn::batch_gradient(f.net, f.params, f.xs, f.ys, &ce_only).gradient;
  const auto b = nn::batch_gradient(f.net, f.params, f.xs, f.ys, &pol_only).gradient;
  const auto plain = nn::batch_gradient(f.net, f.params, f.xs, f.ys).gradient;
  EXPECT_FALSE(mixed.gradients.private_head.has_value());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weight.size(); ++i) {
      EXPECT_NEAR(mixed.gradients.layers[l].weight[i],
                  0.7 * a.layers[l].weight[i] + 0.4 * b.layers[l].weight[i], 1e-10);
      EXPECT_NEAR(a.layers[l].weight[i], plain.layers[l].weight[i], 1e-15);
    }
  }
}

TEST(Spn, InactiveHingesLeaveScaledCrossEntropy) {
  Fixture f(8, 4, true);
  std::mt19937_64 rng(9);
  auto spn = nn::make_spn(f.net, {1.0, 0.5, 1.0, 8}, rng);
  for (auto& v : spn.head.weight.values()) v = 0.0;
  for (std::size_t k = 0; k < spn.bits; ++k) spn.head.bias[k] = 2.0 * spn.codes[1][k];
  const auto shared = defense::spn_shared_gradients(f.net, f.params, f.xs, f.ys, spn);
  const auto plain = nn::batch_gradient(f.net, f.params, f.xs, f.ys).gradient;
  EXPECT_EQ(shared.gradients.layers, plain.layers);
}

TEST(Spn, DefendedStepNeedsHead) {
  Fixture f(10);
  std::mt19937_64 rng(1);
  EXPECT_THROW(defense::defended_step(f.net, f.params, f.xs, f.ys, defense::SpnDefense{},
                                      nullptr, rng),
               ConfigError);
}

TEST(PerturbationRatio, Examples) {
  const nn::NetworkSpec net({1}, {nn::Dense{1, 2}});
  nn::GradientVector clean;
  clean.layers.push_back({nn::Tensor({2, 1}), nn::Tensor::vector({3, 4})});
  auto noisy = clean;
  noisy.layers[0].bias = nn::Tensor::vector({3, 4 + 0.5});
  auto r = defense::perturbation_ratio(clean, noisy, net);
  EXPECT_DOUBLE_EQ(r.ratio, 10.0);
  EXPECT_DOUBLE_EQ(r.x_axis, std::log10(11.0));
  noisy.layers[0].bias = nn::Tensor::vector({3 + 3, 4 + 4});
  EXPECT_DOUBLE_EQ(defense::perturbation_ratio(clean, noisy, net).ratio, 1.0);
  EXPECT_TRUE(std::isinf(defense::perturbation_ratio(clean, clean, net).ratio));
  auto zero = clean;
  zero.layers[0].bias = nn::Tensor::vector({0, 0});
  EXPECT_THROW(defense::perturbation_ratio(zero, clean, net), DegenerateSystemError);
}

TEST(PerturbationRatio, FallsAsNoiseGrows) {
  Fixture f(11);
  double previous = std::numeric_limits<double>::infinity();
  for (double sigma : {0.001, 0.01, 0.1, 1.0}) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      std::mt19937_64 rng(s);
      const auto step =
          defense::defended_step(f.net, f.params, f.xs, f.ys, defense::DpNoise{NoiseFamily::kGaussian, sigma}, nullptr, rng);
      mean += defense::perturbation_ratio(step.clean, step.shared.gradients, f.net).ratio / 10.0;
    }
    EXPECT_LT(mean, previous) << sigma;
    previous = mean;
  }
}

TEST(Mechanism, NamesStrengthsAndValidation) {
  using defense::MechanismConfig;
  EXPECT_EQ(defense::mechanism_name(MechanismConfig{defense::NoDefense{}}), "none");
  EXPECT_EQ(defense::mechanism_strength(defense::with_strength(defense::DpNoise{}, 0.2)), 0.2);
  EXPECT_EQ(defense::mechanism_strength(defense::with_strength(defense::Ppdl{}, 0.4)), 0.4);
  EXPECT_EQ(defense::mechanism_strength(defense::with_strength(defense::SpnDefense{}, 0.3)), 0.3);
  EXPECT_THROW(defense::with_strength(defense::Ppdl{}, 0.0), ConfigError);
  EXPECT_THROW(defense::validate(defense::SpnDefense{{1.0, 0.1, 0.5, 8}}), ConfigError);
  EXPECT_EQ(defense::parse_noise_family("laplace"), NoiseFamily::kLaplacian);
  EXPECT_THROW(defense::parse_noise_family("cauchy"), ConfigError);
}
