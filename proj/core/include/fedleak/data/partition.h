#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "fedleak/data/dataset.h"

namespace fedleak::data {

struct Iid {};
struct Dirichlet {
  double alpha = 0.9;
};
using PartitionScheme = std::variant<Iid, Dirichlet>;

// K disjoint index lists covering the dataset.
//
// Iid deals each class's shuffled examples round-robin, continuing the
// client cursor across classes, so per-class counts differ by at most one.
// Dirichlet draws per-class client proportions from Dirichlet(alpha * 1_K)
// and redraws (up to 100 times) whenever a client would end up empty.
std::vector<std::vector<std::size_t>> partition(const Dataset& dataset, std::size_t clients,
                                                const PartitionScheme& scheme, std::uint64_t seed);

}  // namespace fedleak::data
