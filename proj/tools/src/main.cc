#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "commands.h"
#include "config.h"
#include "fedleak/error.h"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fedleak");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("FEDLEAK_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("FEDLEAK_LOG={} not recognised; using info", level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"fedleak: federated-learning privacy lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t jobs = 0;
  for (const char* name : {"gen-data", "train", "attack", "sweep", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  const CLI::App* sub = app.get_subcommands().front();
  try {
    auto cfg = fedleak::cli::load_config(config_path);
    fedleak::cli::Overrides ov;
    if (sub->count("--seed") > 0) ov.seed = seed;
    if (sub->count("--out") > 0) ov.out = out_dir;
    if (sub->count("--jobs") > 0) ov.jobs = jobs;
    fedleak::cli::apply_overrides(cfg, ov);

    const std::string name = sub->get_name();
    if (name == "gen-data") {
      fedleak::cli::cmd_gen_data(cfg);
    } else if (name == "train") {
      fedleak::cli::cmd_train(cfg);
    } else if (name == "attack") {
      fedleak::cli::cmd_attack(cfg);
    } else if (name == "sweep") {
      fedleak::cli::cmd_sweep(cfg);
    } else {
      fedleak::cli::cmd_report(cfg);
    }
  } catch (const fedleak::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
  return kOk;
}
