#include "fedleak/fed/fedsim.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "fedleak/error.h"
#include "fedleak/eval/metrics.h"
#include "fedleak/nn/engine.h"
#include "fedleak/seed.h"

namespace fedleak::fed {

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::kFedAvg ? "fedavg" : "round_robin";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "fedavg") return Aggregation::kFedAvg;
  if (name == "round_robin") return Aggregation::kRoundRobin;
  throw ConfigError("unknown aggregation '" + std::string(name) +
                    "' (expected fedavg or round_robin)");
}

void FedConfig::validate() const {
  if (clients < 1) throw ConfigError("clients must be at least 1");
  if (rounds < 1) throw ConfigError("rounds must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (victim >= clients) throw ConfigError("victim must be a valid client id");
  if (mechanisms.size() != 1 && mechanisms.size() != clients) {
    throw ConfigError("give one mechanism for all clients or one per client");
  }
  for (const auto& m : mechanisms) defense::validate(m);
  if (const auto* sgd = std::get_if<Sgd>(&optimizer)) {
    if (!(sgd->lr > 0.0) || !(sgd->momentum >= 0.0 && sgd->momentum < 1.0)) {
      throw ConfigError("SGD needs lr > 0 and momentum in [0, 1)");
    }
  } else {
    const auto& adam = std::get<AdamOpt>(optimizer);
    if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
      throw ConfigError("Adam needs lr > 0 and betas in [0, 1)");
    }
  }
  if (!(decay.factor > 0.0)) throw ConfigError("lr decay factor must be positive");
  if (const auto* d = std::get_if<data::Dirichlet>(&partition); d && !(d->alpha > 0.0)) {
    throw ConfigError("Dirichlet alpha must be positive");
  }
  for (std::size_t bs : capture.batch_sizes) {
    if (bs < 1) throw ConfigError("capture batch sizes must be positive");
  }
  for (std::size_t c : capture.clients) {
    if (c >= clients) throw ConfigError("capture client " + std::to_string(c) + " out of range");
  }
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

const defense::MechanismConfig& FedConfig::mechanism(std::size_t client) const {
  return mechanisms.size() == 1 ? mechanisms.front() : mechanisms.at(client);
}

double FedConfig::learning_rate(std::size_t round) const {
  double lr = std::visit([](const auto& o) { return o.lr; }, optimizer);
  for (std::size_t m : decay.milestones) {
    if (round >= m) lr *= decay.factor;
  }
  return lr;
}

std::vector<ClientState> make_clients(const nn::NetworkSpec& net, const FedConfig& fed) {
  std::vector<ClientState> states(fed.clients);
  for (std::size_t k = 0; k < fed.clients; ++k) {
    states[k].id = k;
    if (const auto* s = std::get_if<defense::SpnDefense>(&fed.mechanism(k))) {
      std::mt19937_64 rng(derive_seed(fed.seed, "spn", k));
      states[k].spn = nn::make_spn(net, s->options, rng);
    }
  }
  return states;
}

nn::Tensor network_input(const nn::NetworkSpec& net, const data::Dataset& dataset, std::size_t i) {
  return dataset.image(i).reshaped(net.input_shape());
}

namespace {

// Flat views over every trainable tensor of a model plus an optional head.
std::vector<nn::Tensor*> param_tensors(nn::Params& params, std::optional<nn::SpnConfig>& spn) {
  std::vector<nn::Tensor*> out;
  for (auto& l : params.layers) {
    if (l.weight.empty()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  if (spn) {
    out.push_back(&spn->head.weight);
    out.push_back(&spn->head.bias);
  }
  return out;
}

std::vector<const nn::Tensor*> grad_tensors(const nn::GradientVector& g) {
  std::vector<const nn::Tensor*> out;
  for (const auto& l : g.layers) {
    if (l.weight.empty()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  if (g.private_head) {
    out.push_back(&g.private_head->weight);
    out.push_back(&g.private_head->bias);
  }
  return out;
}

class LocalStepper {
 public:
  LocalStepper(const LocalOptimizer& opt, double lr) : opt_(opt), lr_(lr) {}

  void step(const std::vector<nn::Tensor*>& params, const std::vector<const nn::Tensor*>& grads) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.emplace_back(p->size(), 0.0);
        second_.emplace_back(p->size(), 0.0);
      }
    }
    ++t_;
    if (const auto* sgd = std::get_if<Sgd>(&opt_)) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i]->values();
        const auto g = grads[i]->values();
        auto& v = first_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          if (sgd->momentum > 0.0) {
            v[k] = sgd->momentum * v[k] + g[k];
            w[k] -= lr_ * v[k];
          } else {
            w[k] -= lr_ * g[k];
          }
        }
      }
      return;
    }
    const auto& adam = std::get<AdamOpt>(opt_);
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i]->values();
      const auto g = grads[i]->values();
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = adam.beta1 * m[k] + (1.0 - adam.beta1) * g[k];
        v[k] = adam.beta2 * v[k] + (1.0 - adam.beta2) * g[k] * g[k];
        w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam.epsilon);
      }
    }
  }

 private:
  const LocalOptimizer& opt_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> first_, second_;
};

}  // namespace

ClientUpdate client_update(const nn::NetworkSpec& net, const nn::Params& global,
                           ClientState& state, const data::Dataset& shard, const FedConfig& fed,
                           std::size_t round, std::mt19937_64& rng) {
  if (shard.size() == 0) throw ConfigError("client shard is empty");
  const defense::MechanismConfig& mechanism = fed.mechanism(state.id);
  const bool use_spn = std::holds_alternative<defense::SpnDefense>(mechanism);
  if (use_spn && !state.spn) throw ConfigError("SPN client has no private head");

  nn::Params local = global;
  LocalStepper stepper(fed.optimizer, fed.learning_rate(round));
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), 0);
  ClientUpdate out;
  for (std::size_t epoch = 0; epoch < fed.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += fed.batch_size) {
      const std::size_t end = std::min(order.size(), start + fed.batch_size);
      std::vector<nn::Tensor> inputs;
      std::vector<std::size_t> labels;
      for (std::size_t k = start; k < end; ++k) {
        inputs.push_back(network_input(net, shard, order[k]));
        labels.push_back(shard.label(order[k]));
      }
      const nn::SpnConfig* spn = use_spn ? &*state.spn : nullptr;
      const auto bg = nn::batch_gradient(net, local, inputs, labels, spn);
      if (!std::isfinite(bg.loss) || !nn::all_finite(bg.gradient)) {
        throw NumericError("client " + std::to_string(state.id) + " hit a non-finite loss in round " +
                           std::to_string(round));
      }
      std::optional<nn::SpnConfig> none;
      stepper.step(param_tensors(local, use_spn ? state.spn : none), grad_tensors(bg.gradient));
      epoch_loss += bg.loss;
      ++batches;
    }
    out.loss = epoch_loss / static_cast<double>(batches);
  }
  out.update = defense::defend_update(nn::difference(local, global), mechanism, rng);
  return out;
}

nn::Params server_fedavg(const nn::Params& global, const std::vector<nn::GradientVector>& deltas) {
  if (deltas.empty()) throw ConfigError("FedAvg needs at least one client update");
  nn::GradientVector sum = nn::zero_gradient(global);
  for (const auto& d : deltas) {
    if (!nn::congruent(sum, d)) throw ConfigError("client update shape mismatch");
    nn::add_scaled(sum, d, 1.0);
  }
  nn::Params out = global;
  nn::add_scaled(out, sum, 1.0 / static_cast<double>(deltas.size()));
  return out;
}

namespace {

void capture_round(const nn::NetworkSpec& net, const FedConfig& fed, const nn::Params& global,
                   const std::vector<data::Dataset>& shards, const std::vector<ClientState>& states,
                   std::size_t round, std::size_t& step, GradientTranscript& transcript) {
  std::vector<std::size_t> captured = fed.capture.clients;
  if (captured.empty()) captured.push_back(fed.victim);
  for (std::size_t c : captured) {
    std::mt19937_64 rng(derive_seed(fed.seed, "capture", round * fed.clients + c));
    const data::Dataset& shard = shards[c];
    std::vector<std::size_t> order(shard.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    for (std::size_t bs : fed.capture.batch_sizes) {
      if (bs > shard.size()) {
        throw ConfigError("capture batch size " + std::to_string(bs) + " exceeds client " +
                          std::to_string(c) + "'s shard");
      }
      for (std::size_t rep = 0; rep < fed.capture.per_round; ++rep) {
        Evaluation ev;
        for (std::size_t k = 0; k < bs; ++k) {
          const std::size_t idx = order[cursor++ % order.size()];
          ev.inputs.push_back(network_input(net, shard, idx));
          ev.labels.push_back(shard.label(idx));
        }
        const nn::SpnConfig* spn = states[c].spn ? &*states[c].spn : nullptr;
        auto ds = defense::defended_step(net, global, ev.inputs, ev.labels, fed.mechanism(c), spn,
                                         rng);
        ds.shared.step = step;
        ev.clean = std::move(ds.clean);
        TranscriptRecord rec;
        rec.round = round;
        rec.step = step++;
        rec.client = c;
        rec.kind = RecordKind::kGradient;
        rec.batch_size = bs;
        rec.update = std::move(ds.shared);
        rec.public_params = global;
        rec.evaluation = std::move(ev);
        transcript.append(std::move(rec));
      }
    }
  }
}

std::vector<data::Dataset> make_shards(const FedConfig& fed, const data::Dataset& train) {
  const auto parts = data::partition(train, fed.clients, fed.partition,
                                     derive_seed(fed.seed, "partition"));
  std::vector<data::Dataset> shards;
  shards.reserve(parts.size());
  for (const auto& p : parts) shards.push_back(train.subset(p));
  return shards;
}

}  // namespace

FedResult run_federated(const nn::NetworkSpec& net, const FedConfig& fed,
                        const data::Dataset& train, const data::Dataset& test) {
  fed.validate();
  if (nn::shape_size(train.image_shape()) != nn::shape_size(net.input_shape())) {
    throw ConfigError("dataset images do not fit the network input");
  }
  if (train.num_classes() > net.num_classes()) {
    throw ConfigError("network has fewer outputs than the dataset has classes");
  }
  const auto shards = make_shards(fed, train);
  FedResult result;
  result.clients = make_clients(net, fed);
  std::mt19937_64 init_rng(derive_seed(fed.seed, "init"));
  result.params = nn::init_params(net, init_rng);
  const auto& capture_rounds = fed.capture.rounds;
  const bool capture_enabled = !fed.capture.batch_sizes.empty() && fed.capture.per_round > 0;

  for (std::size_t round = 0; round < fed.rounds; ++round) {
    std::size_t step = 0;
    if (capture_enabled &&
        std::find(capture_rounds.begin(), capture_rounds.end(), round) != capture_rounds.end()) {
      capture_round(net, fed, result.params, shards, result.clients, round, step,
                    result.transcript);
    }
    auto client_rng = [&](std::size_t k) {
      return std::mt19937_64(derive_seed(fed.seed, "client", round * fed.clients + k));
    };
    auto record_delta = [&](std::size_t k, const nn::Params& downloaded,
                            const defense::SharedUpdate& update) {
      if (!fed.capture.deltas || k != fed.victim) return;
      TranscriptRecord rec;
      rec.round = round;
      rec.step = step++;
      rec.client = k;
      rec.kind = RecordKind::kDelta;
      rec.batch_size = fed.batch_size;
      rec.update = update;
      rec.update.step = rec.step;
      rec.public_params = downloaded;
      result.transcript.append(std::move(rec));
    };

    if (fed.aggregation == Aggregation::kRoundRobin) {
      for (std::size_t k = 0; k < fed.clients; ++k) {
        auto rng = client_rng(k);
        const nn::Params downloaded = result.params;
        auto cu = client_update(net, downloaded, result.clients[k], shards[k], fed, round, rng);
        nn::add_scaled(result.params, cu.update.gradients, 1.0);
        record_delta(k, downloaded, cu.update);
      }
    } else {
      std::vector<ClientUpdate> updates(fed.clients);
      std::vector<std::exception_ptr> errors(fed.clients);
      auto work = [&](std::size_t k) {
        try {
          auto rng = client_rng(k);
          updates[k] = client_update(net, result.params, result.clients[k], shards[k], fed, round,
                                     rng);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      };
      const std::size_t width = std::min(fed.jobs, fed.clients);
      if (width <= 1) {
        for (std::size_t k = 0; k < fed.clients; ++k) work(k);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < width; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t k = w; k < fed.clients; k += width) work(k);
          });
        }
        for (auto& t : pool) t.join();
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      std::vector<nn::GradientVector> deltas;
      for (std::size_t k = 0; k < fed.clients; ++k) {
        record_delta(k, result.params, updates[k].update);
        deltas.push_back(std::move(updates[k].update.gradients));
      }
      result.params = server_fedavg(result.params, deltas);
    }
    result.accuracy.push_back(eval::accuracy(net, result.params, test));
  }
  return result;
}

nn::Params train_standalone(const nn::NetworkSpec& net, const FedConfig& fed,
                            const data::Dataset& shard) {
  FedConfig solo = fed;
  solo.clients = 1;
  solo.victim = 0;
  solo.aggregation = Aggregation::kFedAvg;
  solo.partition = data::Iid{};
  solo.mechanisms = {defense::NoDefense{}};
  solo.capture = CaptureConfig{{}, {}, 0, {}, false};
  solo.jobs = 1;
  return run_federated(net, solo, shard, shard).params;
}

}  // namespace fedleak::fed
