#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedleak/attack/gradient_match.h"
#include "fedleak/attack/iterative_attack.h"
#include "fedleak/error.h"
#include "fedleak/eval/metrics.h"
#include "fedleak/nn/engine.h"
#include "fedleak/nn/spn.h"

using namespace fedleak;

namespace {

struct Scene {
  nn::NetworkSpec net;
  nn::Params params;
  std::vector<nn::Tensor> xs;
  std::vector<std::size_t> ys;
  defense::SharedUpdate shared;
};

Scene make_scene(nn::NetworkSpec net, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Scene s{net, nn::init_params(net, rng), {}, {}, {}};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < batch; ++i) {
    nn::Tensor x(net.input_shape());
    for (auto& v : x.values()) v = u(rng);
    s.xs.push_back(x);
    s.ys.push_back((i + seed) % net.num_classes());
  }
  s.shared.gradients = nn::batch_gradient(s.net, s.params, s.xs, s.ys).gradient;
  return s;
}

nn::NetworkSpec mlp() {
  return nn::NetworkSpec({12}, {nn::Dense{12, 8, nn::Activation::kSigmoid}, nn::Dense{8, 3}});
}

nn::NetworkSpec small_cnn() {
  return nn::NetworkSpec({1, 5, 5}, {nn::Conv2d{1, 2, 3, 1, 1, nn::Activation::kSigmoid},
                                     nn::Flatten{}, nn::Dense{50, 3}});
}

std::vector<double> random_point(const attack::GradientMatchObjective& obj, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), l(-1.0, 1.0);
  std::vector<double> z(obj.num_variables());
  const std::size_t split = obj.label_offset(0);
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = k < split ? u(rng) : l(rng);
  return z;
}

void expect_gradients_agree(const attack::GradientMatchObjective& obj, std::uint64_t seed) {
  const auto z = random_point(obj, seed);
  std::vector<double> exact(z.size()), fd(z.size());
  const double f = obj.value_and_gradient(z, exact);
  EXPECT_DOUBLE_EQ(f, obj.value(z));
  obj.finite_difference_gradient(z, 1e-5, fd);
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  ASSERT_GT(scale, 0.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    EXPECT_NEAR(exact[k], fd[k], 1e-6 * scale + 1e-10) << "variable " << k;
  }
}

}  // namespace

TEST(GradientMatch, NestedReverseMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto s = make_scene(mlp(), 1, seed);
    expect_gradients_agree(attack::GradientMatchObjective(s.net, s.params, s.shared, 1), seed);
    auto b = make_scene(mlp(), 3, seed);
    expect_gradients_agree(attack::GradientMatchObjective(b.net, b.params, b.shared, 3), seed);
    auto c = make_scene(small_cnn(), 2, seed);
    expect_gradients_agree(attack::GradientMatchObjective(c.net, c.params, c.shared, 2), seed);
  }
}

TEST(GradientMatch, MaskedEntriesDropOut) {
  auto s = make_scene(mlp(), 2, 4);
  const auto masked = defense::apply_ppdl(s.shared.gradients, 0.3);
  const attack::GradientMatchObjective obj(s.net, s.params, masked, 2);
  expect_gradients_agree(obj, 4);
  // The true batch matches every transmitted entry exactly.
  std::vector<double> z(obj.num_variables(), 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    std::copy(s.xs[j].values().begin(), s.xs[j].values().end(), z.begin() + obj.input_offset(j));
    z[obj.label_offset(j) + s.ys[j]] = 40.0;
  }
  EXPECT_LT(obj.value(z), 1e-12);
}

TEST(GradientMatch, GradientSignsAgreeWithFiniteDifferences) {
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = make_scene(small_cnn(), 2, 10 + seed);
    const attack::GradientMatchObjective obj(s.net, s.params, s.shared, 2);
    const auto z = random_point(obj, seed);
    std::vector<double> exact(z.size()), fd(z.size());
    obj.value_and_gradient(z, exact);
    obj.finite_difference_gradient(z, 1e-4, fd);
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (std::abs(fd[k]) < 1e-9) continue;
      agree += (exact[k] > 0) == (fd[k] > 0);
      ++total;
    }
  }
  EXPECT_GT(static_cast<double>(agree) / total, 0.95);
}

TEST(GradientMatch, RejectsMismatchedInputs) {
  auto s = make_scene(mlp(), 1, 0);
  EXPECT_THROW(attack::GradientMatchObjective(s.net, s.params, s.shared, 0), ConfigError);
  auto bad = s.shared;
  bad.gradients.layers.pop_back();
  EXPECT_THROW(attack::GradientMatchObjective(s.net, s.params, bad, 1), ConfigError);
}

TEST(IterativeAttack, StartingAtTheTruthStopsImmediately) {
  auto s = make_scene(mlp(), 2, 3);
  attack::AttackStart start;
  for (std::size_t j = 0; j < 2; ++j) {
    start.inputs.push_back(s.xs[j]);
    std::vector<double> logits(3, 0.0);
    logits[s.ys[j]] = 40.0;
    start.label_logits.push_back(logits);
  }
  const auto r = attack::iterative_reconstruct(s.net, s.params, s.shared, 2, {}, start);
  EXPECT_LT(r.loss, 1e-12);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.labels, s.ys);
  EXPECT_EQ(r.trajectory.size(), 1u);
}

TEST(IterativeAttack, RecoversAnUndefendedSingleExample) {
  auto s = make_scene(mlp(), 1, 6);
  attack::AttackConfig cfg;
  cfg.seed = 1;
  const auto r = attack::iterative_reconstruct(s.net, s.params, s.shared, 1, cfg);
  EXPECT_FALSE(r.diverged);
  EXPECT_LT(eval::rmse(r.inputs[0], s.xs[0]), 1e-3);
  EXPECT_EQ(r.labels[0], s.ys[0]);
  EXPECT_LE(r.trajectory.back(), r.trajectory.front());
}

TEST(IterativeAttack, AdamAlsoReducesTheLoss) {
  auto s = make_scene(mlp(), 1, 7);
  attack::AttackConfig cfg;
  cfg.optimizer = attack::Adam{};
  cfg.max_iters = 100;
  const auto r = attack::iterative_reconstruct(s.net, s.params, s.shared, 1, cfg);
  EXPECT_EQ(r.trajectory.size(), r.iterations + 1);
  EXPECT_LT(r.loss, r.trajectory.front());
}

TEST(IterativeAttack, InitialisationIsSeededAndInRange) {
  attack::AttackConfig cfg;
  cfg.seed = 5;
  const auto a = attack::initial_variables(small_cnn(), 2, cfg);
  EXPECT_EQ(a, attack::initial_variables(small_cnn(), 2, cfg));
  EXPECT_EQ(a.size(), 2u * (25 + 3));
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_GE(a[k], 0.2);
    EXPECT_LE(a[k], 0.8);
  }
  cfg.seed = 6;
  EXPECT_NE(a, attack::initial_variables(small_cnn(), 2, cfg));
}

TEST(IterativeAttack, SeesOnlyPublicState) {
  // Two clients with different private heads share the same backbone update;
  // the adversary's result depends on that update alone.
  auto s = make_scene(mlp(), 1, 9);
  std::mt19937_64 r1(1), r2(2);
  const auto spn1 = nn::make_spn(s.net, {1.0, 0.5, 1.0, 8}, r1);
  const auto spn2 = nn::make_spn(s.net, {1.0, 0.5, 1.0, 8}, r2);
  const auto g1 = defense::spn_shared_gradients(s.net, s.params, s.xs, s.ys, spn1);
  const auto g2 = defense::spn_shared_gradients(s.net, s.params, s.xs, s.ys, spn2);
  EXPECT_FALSE(g1.gradients.private_head.has_value());
  attack::AttackConfig cfg;
  cfg.max_iters = 30;
  const auto a = attack::iterative_reconstruct(s.net, s.params, g1, 1, cfg);
  const auto b = attack::iterative_reconstruct(s.net, s.params, g1, 1, cfg);
  EXPECT_EQ(a.trajectory, b.trajectory);
  EXPECT_NE(g1.gradients, g2.gradients);
}

TEST(IterativeAttack, ConfigValidation) {
  attack::AttackConfig cfg;
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.gradient = attack::FiniteDifference{0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.optimizer = attack::Adam{0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ScoreAttack, GreedyAssignmentAndMembership) {
  attack::AttackResult r;
  r.inputs = {nn::Tensor::vector({0.0, 1.0}), nn::Tensor::vector({1.0, 0.0})};
  r.labels = {1, 1};
  const std::vector<nn::Tensor> truth = {nn::Tensor::vector({1.0, 0.0}),
                                         nn::Tensor::vector({0.0, 1.0})};
  const std::vector<std::size_t> labels = {0, 1};
  const auto rep = attack::score_attack(r, truth, labels);
  EXPECT_EQ(rep.assignment, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(rep.rmse, 0.0);
  EXPECT_EQ(rep.membership, 0.5);
  EXPECT_THROW(attack::score_attack(r, std::span(truth).first(1), labels), MetricError);
}
