#include "evorl/runner.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "evorl/checkpoint.hpp"
#include "evorl/config.hpp"
#include "evorl/metrics.hpp"
#include "evorl/thread_pool.hpp"
#include "evorl/workflow.hpp"

namespace evorl {

namespace {

Config build_config(const RunOptions& opts) {
  Config cfg = opts.config_path.empty() ? Config::defaults() : Config::from_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + kv + "': expected key=value");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.out_dir.empty()) {
    cfg.set("out_dir", opts.out_dir);
  } else if (const char* env_out = std::getenv("EVORL_OUT_DIR")) {
    cfg.set("out_dir", env_out);
  }
  if (opts.workers >= 0) cfg.set("exec.workers", std::to_string(opts.workers));
  return cfg;
}

}  // namespace

int run_experiment(const RunOptions& opts) {
  Config cfg;
  std::unique_ptr<Workflow> wf;
  try {
    cfg = build_config(opts);
    wf = build_workflow(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::string out_dir = cfg.get_string("out_dir");
    std::filesystem::create_directories(out_dir);

    ThreadPool pool(static_cast<int>(cfg.get_int("exec.workers")));
    ExecContext ctx{&pool};

    std::unique_ptr<WorkflowState> state;
    if (!opts.resume_path.empty()) {
      state = load_checkpoint_state(*wf, opts.resume_path);
    } else {
      state = wf->init(key_from_seed(static_cast<std::uint64_t>(cfg.get_int("seed"))), ctx);
    }

    MetricsWriter metrics(out_dir + "/metrics.jsonl", out_dir + "/timings.log");
    metrics.write_header(wf->id(), cfg);

    LearnOptions lo;
    lo.budget.iterations = cfg.get_int("budget.iterations");
    lo.budget.episodes = cfg.get_int("budget.episodes");
    lo.budget.env_steps = cfg.get_int("budget.env_steps");
    lo.eval_interval = static_cast<int>(cfg.get_int("eval.interval"));
    lo.eval_episodes = static_cast<int>(cfg.get_int("eval.episodes"));
    lo.checkpoint_interval = static_cast<int>(cfg.get_int("checkpoint.interval"));
    lo.checkpoint_path = out_dir + "/checkpoint.bin";

    learn(*wf, *state, ctx, lo, metrics);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace evorl
