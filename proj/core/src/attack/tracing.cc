#include "fedleak/attack/tracing.h"

#include <limits>
#include <string>

#include "fedleak/error.h"

namespace fedleak::attack {

double membership_distance(std::span<const std::size_t> recovered,
                           std::span<const std::size_t> truth) {
  if (recovered.size() != truth.size()) throw MetricError("label lists differ in length");
  if (truth.empty()) throw MetricError("membership distance needs at least one label");
  std::size_t mismatches = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (recovered[k] != truth[k]) ++mismatches;
  }
  return static_cast<double>(mismatches) / static_cast<double>(truth.size());
}

std::size_t trace_item(const TracingSet& reconstructed, const nn::Tensor& query) {
  if (reconstructed.items.empty()) throw MetricError("no reconstructions to trace against");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_id = reconstructed.ids.at(0);
  for (std::size_t r = 0; r < reconstructed.items.size(); ++r) {
    const nn::Tensor& item = reconstructed.items[r];
    if (item.size() != query.size()) throw MetricError("tracing items differ in size");
    double dist = 0.0;
    for (std::size_t k = 0; k < item.size(); ++k) {
      const double d = item[k] - query[k];
      dist += d * d;
    }
    if (dist < best) {
      best = dist;
      best_id = reconstructed.ids[r];
    }
  }
  return best_id;
}

double tracing_attack(const TracingSet& reconstructed, std::size_t partitions,
                      const TracingSet& queries) {
  if (partitions < 2) throw MetricError("tracing needs at least two partitions");
  if (reconstructed.items.size() != reconstructed.ids.size() ||
      queries.items.size() != queries.ids.size()) {
    throw MetricError("tracing sets need one id per item");
  }
  if (queries.items.empty()) throw MetricError("tracing needs at least one query");
  std::vector<std::size_t> counts(partitions, 0);
  for (std::size_t id : reconstructed.ids) {
    if (id >= partitions) throw MetricError("participant id " + std::to_string(id) + " out of range");
    ++counts[id];
  }
  for (std::size_t p = 0; p < partitions; ++p) {
    if (counts[p] == 0) throw MetricError("partition " + std::to_string(p) + " is empty");
  }
  std::size_t mismatches = 0;
  for (std::size_t q = 0; q < queries.items.size(); ++q) {
    if (trace_item(reconstructed, queries.items[q]) != queries.ids[q]) ++mismatches;
  }
  return static_cast<double>(mismatches) / static_cast<double>(queries.items.size());
}

}  // namespace fedleak::attack
