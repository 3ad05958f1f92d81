#include <cstdio>

#include <CLI11.hpp>

#include "evorl/config.hpp"
#include "evorl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"evorl: deterministic evolutionary reinforcement learning on CPU cores"};
  app.require_subcommand(1);

  evorl::RunOptions opts;
  CLI::App* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("config", opts.config_path, "Config file; omit to run on registry defaults")
      ->check(CLI::ExistingFile);
  run->add_option("--set", opts.overrides, "Override a config key, key=value; repeatable")
      ->allow_extra_args(false);
  run->add_option("--workers", opts.workers, "Worker threads, 0 = all cores");
  run->add_option("--out", opts.out_dir, "Output directory (also: EVORL_OUT_DIR)");
  run->add_option("--resume", opts.resume_path, "Checkpoint to resume from")
      ->check(CLI::ExistingFile);

  CLI::App* keys = app.add_subcommand("keys", "List every config key with type and default");

  CLI11_PARSE(app, argc, argv);

  if (keys->parsed()) {
    for (const auto& [key, doc] : evorl::Config::documented_keys()) {
      std::printf("%-32s %s\n", key.c_str(), doc.c_str());
    }
    return 0;
  }
  return evorl::run_experiment(opts);
}
