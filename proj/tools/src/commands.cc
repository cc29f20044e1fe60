#include "commands.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "fedleak/attack/reconstruction.h"
#include "fedleak/attack/tracing.h"
#include "fedleak/error.h"
#include "fedleak/eval/metrics.h"
#include "fedleak/fed/fedsim.h"
#include "fedleak/seed.h"

namespace fedleak::cli {

namespace fs = std::filesystem;

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides) {
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    cfg.fed.seed = *overrides.seed;
  }
  if (overrides.out) cfg.output_dir = *overrides.out;
  if (overrides.jobs) {
    if (*overrides.jobs < 1) throw ConfigError("--jobs: must be at least 1");
    cfg.jobs = *overrides.jobs;
    cfg.fed.jobs = *overrides.jobs;
  }
}

Datasets load_datasets(const ExperimentConfig& cfg) {
  const DatasetBlock& d = cfg.dataset;
  if (d.kind == DatasetBlock::Kind::kIdx) {
    return {data::load_idx(d.images, d.labels), data::load_idx(d.test_images, d.test_labels)};
  }
  return {data::gen_synthetic(d.classes, d.per_class, d.side, d.channels,
                              derive_seed(cfg.seed, "data", 0)),
          data::gen_synthetic(d.classes, d.test_per_class, d.side, d.channels,
                              derive_seed(cfg.seed, "data", 1))};
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("output_dir: cannot create " + dir.string());
  }
}

std::optional<AnalyticOutcome> analytic_attack(const nn::NetworkSpec& net,
                                               const fed::TranscriptRecord& rec) {
  if (rec.batch_size != 1 || !rec.evaluation) return std::nullopt;
  if (!std::holds_alternative<nn::Dense>(net.layers()[net.first_trainable_layer()])) {
    return std::nullopt;
  }
  AnalyticOutcome out;
  try {
    const auto observed = attack::extract_system(rec.update.gradients, net);
    const nn::Tensor x = attack::analytic_reconstruct(observed);
    out.rmse = eval::rmse(x.reshaped(rec.evaluation->inputs[0].shape()), rec.evaluation->inputs[0]);
  } catch (const DegenerateSystemError&) {
    out.rmse = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    const auto clean = attack::extract_system(rec.evaluation->clean, net);
    const auto err = attack::system_error(clean, rec.update.gradients);
    out.condition = attack::condition_value(clean, err.bias);
    out.bound = attack::error_bound(clean, err.bias, err.weight);
  } catch (const DegenerateSystemError&) {
    out.condition = out.bound = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  return std::isinf(b) ? b : 0.5 * (a + b);
}

}  // namespace

std::vector<RecordAttack> attack_transcript(const nn::NetworkSpec& net,
                                            const fed::GradientTranscript& transcript,
                                            const AttackBlock& block, std::uint64_t seed) {
  const fed::GradientTranscript view = transcript.attack_view();
  std::vector<RecordAttack> out;
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto& rec = view.records()[i];
    if (rec.kind != fed::RecordKind::kGradient) continue;
    if (std::find(block.batch_sizes.begin(), block.batch_sizes.end(), rec.batch_size) ==
        block.batch_sizes.end()) {
      continue;
    }
    attack::AttackConfig cfg = block.config;
    cfg.seed = derive_seed(seed, "attack", i);
    RecordAttack ra;
    ra.record = i;
    ra.round = rec.round;
    ra.step = rec.step;
    ra.client = rec.client;
    ra.batch_size = rec.batch_size;
    ra.mechanism = rec.update.mechanism;
    ra.strength = rec.update.strength;
    ra.result = attack::iterative_reconstruct(net, rec.public_params, rec.update, rec.batch_size, cfg);
    const auto& full = transcript.records()[i];
    if (full.evaluation) {
      ra.report = attack::score_attack(ra.result, full.evaluation->inputs, full.evaluation->labels);
      ra.ratio = defense::perturbation_ratio(full.evaluation->clean, full.update.gradients, net).ratio;
      if (block.analytic) ra.analytic = analytic_attack(net, full);
    }
    spdlog::debug("record {} (client {}, batch {}): match loss {:.3g} after {} iterations", i,
                  rec.client, rec.batch_size, ra.result.loss, ra.result.iterations);
    out.push_back(std::move(ra));
  }
  return out;
}

std::vector<eval::SweepResult> run_trial(const ExperimentConfig& cfg, const Datasets& data,
                                         const defense::MechanismConfig& mechanism,
                                         std::uint64_t trial_seed) {
  const bool tracing = std::find(cfg.attack.kinds.begin(), cfg.attack.kinds.end(),
                                 eval::AttackKind::kTracing) != cfg.attack.kinds.end();
  if (tracing && cfg.fed.clients < 2) {
    throw ConfigError("attack.kinds: tracing needs at least 2 clients");
  }
  fed::FedConfig fed = cfg.fed;
  fed.mechanisms = {mechanism};
  fed.seed = derive_seed(cfg.seed, "trial", trial_seed);
  fed.capture.batch_sizes = cfg.attack.batch_sizes;
  fed.capture.clients.clear();
  if (tracing) {
    for (std::size_t k = 0; k < fed.clients; ++k) fed.capture.clients.push_back(k);
  }
  fed.capture.deltas = false;
  fed.jobs = 1;
  const auto run = fed::run_federated(cfg.net(), fed, data.train, data.test);
  const double acc = run.accuracy.back();
  const auto attacks = attack_transcript(cfg.net(), run.transcript, cfg.attack, fed.seed);

  std::vector<eval::SweepResult> rows;
  for (std::size_t bs : cfg.attack.batch_sizes) {
    std::vector<double> ratios, rmses, memberships;
    attack::TracingSet recs, queries;
    for (const auto& ra : attacks) {
      if (ra.batch_size != bs) continue;
      ratios.push_back(*ra.ratio);
      const bool victim = ra.client == fed.victim;
      if (victim) {
        rmses.push_back(ra.report->rmse);
        memberships.push_back(ra.report->membership);
      }
      const auto& ev = *run.transcript.records()[ra.record].evaluation;
      for (std::size_t j = 0; j < ra.result.inputs.size(); ++j) {
        recs.items.push_back(ra.result.inputs[j]);
        recs.ids.push_back(ra.client);
        queries.items.push_back(ev.inputs[j]);
        queries.ids.push_back(ra.client);
      }
    }
    if (ratios.empty()) continue;
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    for (eval::AttackKind kind : cfg.attack.kinds) {
      eval::SweepResult r;
      r.mechanism = defense::mechanism_name(mechanism);
      r.strength = defense::mechanism_strength(mechanism);
      r.seed = trial_seed;
      r.batch_size = bs;
      r.ratio = median(ratios);
      r.accuracy = acc;
      r.attack = kind;
      switch (kind) {
        case eval::AttackKind::kReconstruction: r.distance = mean(rmses); break;
        case eval::AttackKind::kMembership: r.distance = mean(memberships); break;
        case eval::AttackKind::kTracing:
          r.distance = attack::tracing_attack(recs, fed.clients, queries);
          break;
      }
      rows.push_back(r);
    }
  }
  return rows;
}

void cmd_gen_data(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind != DatasetBlock::Kind::kSynthetic) {
    throw ConfigError("dataset.kind: gen-data needs a synthetic dataset");
  }
  const Datasets d = load_datasets(cfg);
  const fs::path dir = cfg.output_dir / "data";
  ensure_dir(dir);
  data::write_idx(d.train, dir / "train-images.idx", dir / "train-labels.idx");
  data::write_idx(d.test, dir / "test-images.idx", dir / "test-labels.idx");
  spdlog::info("wrote {} training and {} test images to {}", d.train.size(), d.test.size(),
               dir.string());
}

void cmd_train(const ExperimentConfig& cfg) {
  const Datasets d = load_datasets(cfg);
  ensure_dir(cfg.output_dir);
  fed::FedConfig fed = cfg.fed;
  const auto run = fed::run_federated(cfg.net(), fed, d.train, d.test);
  fed::write_transcript(cfg.output_dir / "transcript.jsonl", run.transcript);
  fed::write_params(cfg.output_dir / "checkpoint.json", run.params);
  std::ofstream acc(cfg.output_dir / "accuracy.csv", std::ios::binary);
  acc << "round,accuracy\n";
  for (std::size_t r = 0; r < run.accuracy.size(); ++r) {
    acc << r << ',' << eval::format_real(run.accuracy[r]) << '\n';
  }
  if (!acc) throw Error("failed writing accuracy.csv");
  spdlog::info("trained {} rounds; final accuracy {:.4f}; {} transcript records", fed.rounds,
               run.accuracy.back(), run.transcript.size());
}

void cmd_attack(const ExperimentConfig& cfg) {
  const fs::path path = cfg.attack.transcript.value_or(cfg.output_dir / "transcript.jsonl");
  if (!fs::exists(path)) throw Error("transcript file not found: " + path.string());
  const auto transcript = fed::read_transcript(path);
  const auto attacks = attack_transcript(cfg.net(), transcript, cfg.attack, cfg.seed);
  ensure_dir(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "attack_reports.csv", std::ios::binary);
  out << "record,round,step,client,batch_size,mechanism,strength,ratio,rmse,membership,"
         "iterations,converged,diverged,match_loss,analytic_rmse,condition,bound\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& ra : attacks) {
    out << ra.record << ',' << ra.round << ',' << ra.step << ',' << ra.client << ','
        << ra.batch_size << ',' << ra.mechanism << ',' << eval::format_real(ra.strength) << ','
        << eval::format_real(ra.ratio.value_or(nan)) << ','
        << eval::format_real(ra.report ? ra.report->rmse : nan) << ','
        << eval::format_real(ra.report ? ra.report->membership : nan) << ','
        << ra.result.iterations << ',' << ra.result.converged << ',' << ra.result.diverged << ','
        << eval::format_real(ra.result.loss) << ','
        << eval::format_real(ra.analytic ? ra.analytic->rmse : nan) << ','
        << eval::format_real(ra.analytic ? ra.analytic->condition : nan) << ','
        << eval::format_real(ra.analytic ? ra.analytic->bound : nan) << '\n';
  }
  if (!out) throw Error("failed writing attack_reports.csv");
  spdlog::info("attacked {} captured steps", attacks.size());
}

void cmd_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep: block is required for the sweep command");
  const SweepBlock& sweep = *cfg.sweep;
  const Datasets d = load_datasets(cfg);
  ensure_dir(cfg.output_dir);

  struct Task {
    double strength;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double s : sweep.strengths) {
    for (std::uint64_t seed : sweep.seeds) tasks.push_back({s, seed});
  }
  std::vector<std::vector<eval::SweepResult>> slots(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const auto mech = defense::with_strength(sweep.mechanism, tasks[t].strength);
        slots[t] = run_trial(cfg, d, mech, tasks[t].seed);
        spdlog::info("sweep point {}={} seed {} done", defense::mechanism_name(mech),
                     tasks[t].strength, tasks[t].seed);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::min(cfg.jobs, tasks.size());
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<eval::SweepResult> all;
  for (auto& s : slots) all.insert(all.end(), s.begin(), s.end());
  auto points = eval::build_ppc(all, cfg.regions);
  eval::sort_points(points);
  eval::write_ppc_csv(cfg.output_dir / "ppc.csv", points);
  spdlog::info("wrote {} PPC rows to {}", points.size(), (cfg.output_dir / "ppc.csv").string());
}

void cmd_report(const ExperimentConfig& cfg) {
  const fs::path in = cfg.report_input.value_or(cfg.output_dir / "ppc.csv");
  const auto points = eval::read_ppc_csv(in);
  if (points.empty()) throw Error(in.string() + ": no PPC rows");
  ensure_dir(cfg.output_dir);
  eval::write_cap_csv(cfg.output_dir / "cap.csv", eval::cap_by_group(points));
  spdlog::info("wrote CAP summary to {}", (cfg.output_dir / "cap.csv").string());
}

}  // namespace fedleak::cli
