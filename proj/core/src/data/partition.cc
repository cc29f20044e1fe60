#include "fedleak/data/partition.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedleak/error.h"

namespace fedleak::data {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& dataset,
                                                       std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes());
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.label(i)].push_back(i);
  for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);
  return by_class;
}

std::vector<std::vector<std::size_t>> iid_split(const Dataset& dataset, std::size_t clients,
                                                std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> parts(clients);
  std::size_t cursor = 0;
  for (const auto& idx : indices_by_class(dataset, rng)) {
    for (auto i : idx) {
      parts[cursor].push_back(i);
      cursor = (cursor + 1) % clients;
    }
  }
  return parts;
}

std::vector<std::vector<std::size_t>> dirichlet_split(const Dataset& dataset,
                                                      std::size_t clients, double alpha,
                                                      std::mt19937_64& rng) {
  constexpr int kMaxAttempts = 100;
  const auto by_class = indices_by_class(dataset, rng);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> parts(clients);
    for (const auto& idx : by_class) {
      std::vector<double> p(clients);
      for (double& v : p) v = gamma(rng);
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      // Contiguous slices at rounded cumulative boundaries sum to the class size.
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < clients; ++k) {
        cum += p[k] / total;
        const std::size_t end =
            k + 1 == clients ? idx.size()
                             : std::min(idx.size(), static_cast<std::size_t>(std::llround(cum * static_cast<double>(idx.size()))));
        for (std::size_t j = start; j < end; ++j) parts[k].push_back(idx[j]);
        start = std::max(start, end);
      }
    }
    const bool all_filled =
        std::all_of(parts.begin(), parts.end(), [](const auto& part) { return !part.empty(); });
    if (all_filled) {
      for (auto& part : parts) std::sort(part.begin(), part.end());
      return parts;
    }
  }
  throw ConfigError("Dirichlet partition left a client empty after 100 draws");
}

}  // namespace

std::vector<std::vector<std::size_t>> partition(const Dataset& dataset, std::size_t clients,
                                                const PartitionScheme& scheme, std::uint64_t seed) {
  if (clients == 0) throw ConfigError("partition needs at least one client");
  if (clients > dataset.size()) {
    throw ConfigError("cannot split " + std::to_string(dataset.size()) + " examples across " +
                      std::to_string(clients) + " clients");
  }
  std::mt19937_64 rng(seed);
  if (const auto* d = std::get_if<Dirichlet>(&scheme)) {
    if (!(d->alpha > 0.0)) throw ConfigError("Dirichlet alpha must be positive");
    return dirichlet_split(dataset, clients, d->alpha, rng);
  }
  auto parts = iid_split(dataset, clients, rng);
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return parts;
}

}  // namespace fedleak::data
