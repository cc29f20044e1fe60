#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "fedleak/data/dataset.h"
#include "fedleak/data/partition.h"
#include "fedleak/defense/mechanism.h"
#include "fedleak/fed/transcript.h"
#include "fedleak/nn/network.h"
#include "fedleak/nn/spn.h"

namespace fedleak::fed {

struct Sgd {
  double lr = 0.01;
  double momentum = 0.0;
};

struct AdamOpt {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using LocalOptimizer = std::variant<Sgd, AdamOpt>;

// Multiply the learning rate by `factor` at each milestone round reached.
struct LrDecay {
  double factor = 0.5;
  std::vector<std::size_t> milestones;
};

enum class Aggregation { kFedAvg, kRoundRobin };

std::string_view to_string(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view name);

// Which per-step gradients get recorded for attack replay. At every capture
// round, each captured client computes `per_round` defended step gradients
// for every batch size on batches drawn from its shard, before training.
struct CaptureConfig {
  std::vector<std::size_t> rounds{0};
  std::vector<std::size_t> batch_sizes{1};
  std::size_t per_round = 1;
  std::vector<std::size_t> clients;  // empty: the victim only
  bool deltas = true;                // also record the victim's round deltas
};

struct FedConfig {
  std::size_t clients = 4;
  std::size_t rounds = 10;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  LocalOptimizer optimizer = AdamOpt{};
  LrDecay decay;
  Aggregation aggregation = Aggregation::kFedAvg;
  data::PartitionScheme partition = data::Iid{};
  // One mechanism for every client, or one per client.
  std::vector<defense::MechanismConfig> mechanisms{defense::NoDefense{}};
  std::size_t victim = 0;
  CaptureConfig capture;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // concurrent clients within a FedAvg round

  void validate() const;
  const defense::MechanismConfig& mechanism(std::size_t client) const;
  double learning_rate(std::size_t round) const;
};

// Per-client state that survives across rounds: only the private SPN head.
struct ClientState {
  std::size_t id = 0;
  std::optional<nn::SpnConfig> spn;
};

// Creates client states, drawing private SPN heads for SPN clients.
std::vector<ClientState> make_clients(const nn::NetworkSpec& net, const FedConfig& fed);

struct ClientUpdate {
  defense::SharedUpdate update;  // defended delta W - G, public layers only
  double loss = 0.0;             // mean training loss of the last epoch
};

// Downloads `global`, trains `local_epochs` epochs on the shard with a fresh
// optimizer state, and returns the defended parameter delta. The private
// head in `state` is trained in place. Throws NumericError on a non-finite
// loss.
ClientUpdate client_update(const nn::NetworkSpec& net, const nn::Params& global,
                           ClientState& state, const data::Dataset& shard, const FedConfig& fed,
                           std::size_t round, std::mt19937_64& rng);

// global + mean of the deltas.
nn::Params server_fedavg(const nn::Params& global, const std::vector<nn::GradientVector>& deltas);

struct FedResult {
  nn::Params params;
  std::vector<double> accuracy;  // test accuracy after every round
  GradientTranscript transcript;
  std::vector<ClientState> clients;
};

FedResult run_federated(const nn::NetworkSpec& net, const FedConfig& fed,
                        const data::Dataset& train, const data::Dataset& test);

// A single client training alone on `shard` with the same schedule, for
// utility baselines.
nn::Params train_standalone(const nn::NetworkSpec& net, const FedConfig& fed,
                            const data::Dataset& shard);

// Flattens an image to the network's input shape.
nn::Tensor network_input(const nn::NetworkSpec& net, const data::Dataset& dataset, std::size_t i);

}  // namespace fedleak::fed
