#include <gtest/gtest.h>

#include <random>

#include "fedleak/attack/tracing.h"
#include "fedleak/error.h"

using namespace fedleak;
using attack::TracingSet;

TEST(Membership, Examples) {
  const std::vector<std::size_t> a = {0, 1, 2, 3};
  EXPECT_EQ(attack::membership_distance(a, a), 0.0);
  EXPECT_EQ(attack::membership_distance(a, std::vector<std::size_t>{0, 1, 0, 0}), 0.5);
  EXPECT_EQ(attack::membership_distance(a, std::vector<std::size_t>{1, 0, 3, 2}), 1.0);
  EXPECT_THROW(attack::membership_distance(a, std::vector<std::size_t>{0}), MetricError);
}

TEST(Tracing, NearestReconstructionWins) {
  TracingSet recs{{nn::Tensor::vector({0, 0}), nn::Tensor::vector({1, 1}), nn::Tensor::vector({0, 0})},
                  {0, 1, 1}};
  EXPECT_EQ(attack::trace_item(recs, nn::Tensor::vector({0.1, 0.0})), 0u);
  EXPECT_EQ(attack::trace_item(recs, nn::Tensor::vector({0.9, 0.8})), 1u);
  // Items 0 and 2 tie; the first one decides.
  EXPECT_EQ(attack::trace_item(recs, nn::Tensor::vector({0, 0})), 0u);
}

TEST(Tracing, PerfectAndSwappedReconstructions) {
  TracingSet recs{{nn::Tensor::vector({0, 0}), nn::Tensor::vector({1, 1})}, {0, 1}};
  TracingSet queries{{nn::Tensor::vector({0.1, 0}), nn::Tensor::vector({1, 0.9})}, {0, 1}};
  EXPECT_EQ(attack::tracing_attack(recs, 2, queries), 0.0);
  queries.ids = {1, 0};
  EXPECT_EQ(attack::tracing_attack(recs, 2, queries), 1.0);
}

TEST(Tracing, UninformativeReconstructionsScoreNearChance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_image = [&] {
    nn::Tensor t({16});
    for (auto& v : t.values()) v = u(rng);
    return t;
  };
  TracingSet recs, queries;
  for (std::size_t id = 0; id < 10; ++id) {
    recs.items.push_back(random_image());
    recs.ids.push_back(id);
  }
  for (std::size_t q = 0; q < 5000; ++q) {
    queries.items.push_back(random_image());
    queries.ids.push_back(q % 10);
  }
  EXPECT_NEAR(attack::tracing_attack(recs, 10, queries), 0.9, 0.02);
}

TEST(Tracing, RejectsMalformedSets) {
  TracingSet one{{nn::Tensor::vector({0})}, {0}};
  TracingSet q{{nn::Tensor::vector({0})}, {0}};
  EXPECT_THROW(attack::tracing_attack(one, 1, q), MetricError);
  EXPECT_THROW(attack::tracing_attack(one, 2, q), MetricError);
  TracingSet out_of_range{{nn::Tensor::vector({0}), nn::Tensor::vector({1})}, {0, 5}};
  EXPECT_THROW(attack::tracing_attack(out_of_range, 2, q), MetricError);
}
