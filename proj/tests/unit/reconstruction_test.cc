#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedleak/attack/reconstruction.h"
#include "fedleak/defense/mechanism.h"
#include "fedleak/error.h"
#include "fedleak/eval/metrics.h"
#include "fedleak/nn/engine.h"

using namespace fedleak;
using attack::ReconstructionSystem;

namespace {

struct Victim {
  nn::NetworkSpec net;
  nn::Params params;
  nn::Tensor x;
  nn::GradientVector grad;
};

Victim make_victim(std::uint64_t seed, nn::Activation a = nn::Activation::kSigmoid,
                   std::size_t d = 16, std::size_t hidden = 12) {
  std::mt19937_64 rng(seed);
  nn::NetworkSpec net({d}, {nn::Dense{d, hidden, a}, nn::Dense{hidden, 3}});
  auto params = nn::init_params(net, rng);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  nn::Tensor x({d});
  for (auto& v : x.values()) v = u(rng);
  const auto grad = nn::backward(net, params, nn::forward(net, params, x), seed % 3);
  return {net, params, x, grad};
}

ReconstructionSystem hand_system() {
  ReconstructionSystem s;
  s.rows = {0, 1};
  s.bias = {2.0, -1.0};
  s.weight = {2.0, 4.0, -1.0, -2.0};
  s.input_dim = 2;
  return s;
}

ReconstructionSystem perturb(ReconstructionSystem s, const attack::SystemError& e) {
  for (std::size_t k = 0; k < s.bias.size(); ++k) s.bias[k] += e.bias[k];
  for (std::size_t k = 0; k < s.weight.size(); ++k) s.weight[k] += e.weight[k];
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(AnalyticReconstruction, HandSystem) {
  const auto x = attack::analytic_reconstruct(hand_system());
  EXPECT_EQ(x.data(), (std::vector<double>{1.0, 2.0}));
}

TEST(AnalyticReconstruction, MedianRejectsAnOutlierRow) {
  auto s = hand_system();
  s.rows = {0, 1, 2};
  s.bias = {2.0, -1.0, 1.0};
  s.weight = {2.0, 4.0, -1.0, -2.0, 9.0, 9.0};
  EXPECT_EQ(attack::analytic_reconstruct(s).data(), (std::vector<double>{1.0, 2.0}));
}

TEST(AnalyticReconstruction, OutputEquationHoldsOnRealGradients) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = make_victim(seed);
    const auto sys = attack::extract_system(v.grad, v.net);
    for (std::size_t k = 0; k < sys.size(); ++k) {
      for (std::size_t n = 0; n < sys.input_dim; ++n) {
        EXPECT_NEAR(sys.weight[k * sys.input_dim + n], sys.bias[k] * v.x[n], 1e-9);
      }
    }
  }
}

TEST(AnalyticReconstruction, RecoversTheInputExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto a : {nn::Activation::kSigmoid, nn::Activation::kTanh, nn::Activation::kRelu}) {
      const auto v = make_victim(seed, a);
      const auto x = attack::analytic_reconstruct(attack::extract_system(v.grad, v.net));
      EXPECT_LT(eval::rmse(x, v.x), 1e-6);
    }
  }
}

TEST(AnalyticReconstruction, ThresholdDropsDeadRows) {
  const nn::NetworkSpec net({2}, {nn::Dense{2, 3}, nn::Dense{3, 2}});
  nn::GradientVector g;
  g.layers.push_back({nn::Tensor({3, 2}, {1, 2, 0, 0, 3, 6}), nn::Tensor::vector({1, 1e-12, 3})});
  g.layers.push_back({nn::Tensor({2, 3}), nn::Tensor({2})});
  const auto s = attack::extract_system(g, net);
  EXPECT_EQ(s.rows, (std::vector<std::size_t>{0, 2}));
  g.layers[0].bias = nn::Tensor({3});
  EXPECT_THROW(attack::extract_system(g, net), DegenerateSystemError);
}

TEST(AnalyticReconstruction, ConvFirstLayerIsRejected) {
  const nn::NetworkSpec net({1, 4, 4}, {nn::Conv2d{1, 1, 3}, nn::Flatten{}, nn::Dense{4, 2}});
  std::mt19937_64 rng(0);
  const auto p = nn::init_params(net, rng);
  EXPECT_THROW(attack::extract_system(nn::zero_gradient(p), net), ConfigError);
}

TEST(ConditionAndBound, Examples) {
  ReconstructionSystem s;
  s.rows = {0, 1};
  s.bias = {2.0, 1.0};
  s.weight = {2.0, 0.0, 0.0, 1.0};
  s.input_dim = 2;
  const std::vector<double> eb = {0.2, 0.5};
  const std::vector<double> no_w(4, 0.0);
  EXPECT_DOUBLE_EQ(attack::condition_value(s, eb), 0.5);
  EXPECT_DOUBLE_EQ(attack::condition_number(s), 2.0);
  EXPECT_DOUBLE_EQ(attack::error_bound(s, eb, no_w), 2.0 / 0.5 * (0.5 / 2.0));
  const std::vector<double> ew = {0.0, 0.0, 0.0, std::sqrt(5.0) * 0.1};
  EXPECT_DOUBLE_EQ(attack::error_bound(s, eb, ew), 4.0 * (0.25 + 0.1));
}

TEST(ConditionAndBound, ZeroBiasErrorLeavesWeightTerm) {
  ReconstructionSystem s = hand_system();
  const std::vector<double> eb = {0.0, 0.0};
  const std::vector<double> ew = {0.5, 0.0, 0.0, 0.0};
  EXPECT_EQ(attack::condition_value(s, eb), 0.0);
  const double w_norm = std::sqrt(4.0 + 16.0 + 1.0 + 4.0);
  EXPECT_DOUBLE_EQ(attack::error_bound(s, eb, ew), 2.0 * 0.5 / w_norm);
}

TEST(ConditionAndBound, CriticalPerturbationVoidsTheGuarantee) {
  ReconstructionSystem s = hand_system();
  EXPECT_EQ(attack::condition_value(s, s.bias), 1.0);
  EXPECT_TRUE(std::isinf(attack::error_bound(s, s.bias, std::vector<double>(4, 0.0))));
  s.bias[1] = 0.0;
  EXPECT_THROW(attack::condition_number(s), DegenerateSystemError);
}

TEST(ConditionAndBound, MonteCarloSoundness) {
  int trials = 0;
  for (std::uint64_t net_seed = 0; net_seed < 5; ++net_seed) {
    const auto v = make_victim(100 + net_seed, net_seed % 2 ? nn::Activation::kTanh
                                                            : nn::Activation::kSigmoid);
    const auto clean = attack::extract_system(v.grad, v.net);
    const double scale = *std::min_element(clean.bias.begin(), clean.bias.end(),
                                           [](double a, double b) { return std::abs(a) < std::abs(b); });
    for (std::uint64_t draw = 0; draw < 40; ++draw) {
      std::mt19937_64 rng(draw * 31 + net_seed);
      const double sigma = std::abs(scale) * (0.05 + 0.9 * (draw % 10) / 10.0);
      const auto noisy = defense::apply_dp_noise(v.grad, defense::NoiseFamily::kGaussian, sigma, rng);
      const auto err = attack::system_error(clean, noisy);
      const double c = attack::condition_value(clean, err.bias);
      if (c >= 1.0) continue;
      const double bound = attack::error_bound(clean, err.bias, err.weight);
      const auto x = attack::analytic_reconstruct(perturb(clean, err));
      EXPECT_LE(eval::rmse(x, v.x), bound) << "net " << net_seed << " draw " << draw;
      ++trials;
    }
  }
  EXPECT_GE(trials, 100);
}

TEST(ConditionAndBound, ErrorGrowsTowardsTheCriticalMagnitude) {
  double previous = -1.0;
  for (double s : {0.1, 0.5, 0.9}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto v = make_victim(200 + seed);
      const auto clean = attack::extract_system(v.grad, v.net);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      attack::SystemError e;
      for (double b : clean.bias) e.bias.push_back(s * u(rng) * b);
      for (double w : clean.weight) e.weight.push_back(s * 0.1 * u(rng) * w);
      ASSERT_LT(attack::condition_value(clean, e.bias), 1.0);
      errors.push_back(eval::rmse(attack::analytic_reconstruct(perturb(clean, e)), v.x));
    }
    const double m = median(errors);
    EXPECT_GE(m, previous) << s;
    previous = m;
  }
}
