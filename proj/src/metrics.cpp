#include "evorl/metrics.hpp"

#include <json.hpp>
#include <sstream>

#include "evorl/config.hpp"

namespace evorl {

using nlohmann::json;  // std::map-backed: keys serialize sorted

MetricsWriter::MetricsWriter(const std::string& metrics_path, const std::string& timings_path)
    : metrics_(metrics_path, std::ios::trunc), timings_(timings_path, std::ios::trunc) {
  if (!metrics_) throw std::runtime_error("cannot open metrics file: " + metrics_path);
  if (!timings_) throw std::runtime_error("cannot open timings file: " + timings_path);
}

void MetricsWriter::write_header(const std::string& workflow_id, const Config& cfg) {
  json rec;
  rec["type"] = "header";
  rec["workflow"] = workflow_id;
  json conf;
  std::istringstream lines(cfg.describe());
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) conf[line.substr(0, eq)] = line.substr(eq + 1);
  }
  rec["config"] = std::move(conf);
  metrics_ << rec.dump() << '\n';
  flush();
}

void MetricsWriter::write_step(std::int64_t iteration, std::int64_t env_steps,
                               std::int64_t episodes, std::int64_t rl_updates,
                               const StepMetrics& extra) {
  json rec;
  rec["type"] = "step";
  rec["iteration"] = iteration;
  rec["env_steps"] = env_steps;
  rec["episodes"] = episodes;
  rec["rl_updates"] = rl_updates;
  for (const auto& [key, value] : extra.scalars) rec[key] = value;
  metrics_ << rec.dump() << '\n';
}

void MetricsWriter::write_eval(std::int64_t iteration, std::int64_t env_steps,
                               std::int64_t episodes, std::int64_t rl_updates, double mean_return,
                               double return_std, int eval_episodes) {
  json rec;
  rec["type"] = "eval";
  rec["iteration"] = iteration;
  rec["env_steps"] = env_steps;
  rec["episodes"] = episodes;
  rec["rl_updates"] = rl_updates;
  rec["eval/episode_return_mean"] = mean_return;
  rec["eval/episode_return_std"] = return_std;
  rec["eval/episodes"] = eval_episodes;
  metrics_ << rec.dump() << '\n';
  flush();
}

void MetricsWriter::write_timing(std::int64_t iteration, double wall_ms) {
  timings_ << iteration << '\t' << wall_ms << '\n';
}

void MetricsWriter::flush() {
  metrics_.flush();
  timings_.flush();
}

}  // namespace evorl
