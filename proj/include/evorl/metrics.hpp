#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace evorl {

class Config;

// Ordered scalar metrics a workflow step reports beside the shared counters.
struct StepMetrics {
  std::vector<std::pair<std::string, double>> scalars;
  void add(std::string key, double value) { scalars.emplace_back(std::move(key), value); }
};

// Append-only JSONL metrics stream plus a wall-clock sidecar. The JSONL bytes
// are a pure function of (config, seed): keys are emitted sorted and all
// timing data goes to the sidecar file instead.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& metrics_path, const std::string& timings_path);

  void write_header(const std::string& workflow_id, const Config& cfg);
  void write_step(std::int64_t iteration, std::int64_t env_steps, std::int64_t episodes,
                  std::int64_t rl_updates, const StepMetrics& extra);
  void write_eval(std::int64_t iteration, std::int64_t env_steps, std::int64_t episodes,
                  std::int64_t rl_updates, double mean_return, double return_std, int eval_episodes);
  void write_timing(std::int64_t iteration, double wall_ms);
  void flush();

 private:
  std::ofstream metrics_, timings_;
};

}  // namespace evorl
