#include <benchmark/benchmark.h>

#include <random>

#include "fedleak/attack/gradient_match.h"
#include "fedleak/attack/reconstruction.h"
#include "fedleak/nn/conv.h"
#include "fedleak/nn/engine.h"

using namespace fedleak;

namespace {

nn::NetworkSpec mlp() {
  return nn::NetworkSpec({64}, {nn::Dense{64, 32, nn::Activation::kSigmoid},
                                nn::Dense{32, 4, nn::Activation::kSigmoid}});
}

nn::NetworkSpec cnn() {
  return nn::NetworkSpec({1, 8, 8}, {nn::Conv2d{1, 4, 3, 1, 1, nn::Activation::kSigmoid},
                                     nn::Flatten{}, nn::Dense{256, 4}});
}

nn::Tensor random_input(const nn::Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nn::Tensor x(shape);
  for (auto& v : x.values()) v = u(rng);
  return x;
}

void BM_ForwardBackward(benchmark::State& state, nn::NetworkSpec net) {
  std::mt19937_64 rng(1);
  const auto params = nn::init_params(net, rng);
  const auto x = random_input(net.input_shape(), rng);
  for (auto _ : state) {
    auto f = nn::forward(net, params, x);
    benchmark::DoNotOptimize(nn::backward(net, params, f, 1));
  }
}
BENCHMARK_CAPTURE(BM_ForwardBackward, mlp, mlp());
BENCHMARK_CAPTURE(BM_ForwardBackward, cnn, cnn());

void BM_MatchGradient(benchmark::State& state) {
  const auto net = mlp();
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const auto params = nn::init_params(net, rng);
  std::vector<nn::Tensor> xs;
  std::vector<std::size_t> ys;
  for (std::size_t i = 0; i < batch; ++i) {
    xs.push_back(random_input(net.input_shape(), rng));
    ys.push_back(i % 4);
  }
  defense::SharedUpdate observed;
  observed.gradients = nn::batch_gradient(net, params, xs, ys).gradient;
  const attack::GradientMatchObjective obj(net, params, observed, batch);
  std::vector<double> z(obj.num_variables(), 0.5), g(obj.num_variables());
  for (auto _ : state) benchmark::DoNotOptimize(obj.value_and_gradient(z, g));
}
BENCHMARK(BM_MatchGradient)->Arg(1)->Arg(4)->Arg(8);

void BM_AnalyticReconstruct(benchmark::State& state) {
  const auto net = mlp();
  std::mt19937_64 rng(3);
  const auto params = nn::init_params(net, rng);
  const auto x = random_input(net.input_shape(), rng);
  const auto g = nn::backward(net, params, nn::forward(net, params, x), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(attack::analytic_reconstruct(attack::extract_system(g, net)));
  }
}
BENCHMARK(BM_AnalyticReconstruct);

void BM_ConvToDense(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const nn::Conv2d conv{3, 8, 3, 1, 1};
  std::mt19937_64 rng(4);
  nn::LayerTensors k{random_input({8, 3, 3, 3}, rng), random_input({8}, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv_to_dense(conv, {3, side, side}, k));
}
BENCHMARK(BM_ConvToDense)->Arg(8)->Arg(16)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
