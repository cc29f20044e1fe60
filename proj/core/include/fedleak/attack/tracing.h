#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedleak/nn/tensor.h"

namespace fedleak::attack {

// Mean 0/1 mismatch between recovered and true labels.
double membership_distance(std::span<const std::size_t> recovered,
                           std::span<const std::size_t> truth);

// Items tagged with the participant they belong to.
struct TracingSet {
  std::vector<nn::Tensor> items;
  std::vector<std::size_t> ids;
};

// Predicted participant of a query: the id of the nearest reconstruction by
// squared pixel distance (first one wins ties).
std::size_t trace_item(const TracingSet& reconstructed, const nn::Tensor& query);

// Mean 0/1 mismatch between predicted and true participant ids over the
// queries. Reconstructions must cover ids 0 .. partitions-1, each at least
// once, with partitions >= 2.
double tracing_attack(const TracingSet& reconstructed, std::size_t partitions,
                      const TracingSet& queries);

}  // namespace fedleak::attack
