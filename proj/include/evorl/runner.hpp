#pragma once

#include <string>
#include <vector>

namespace evorl {

struct RunOptions {
  std::string config_path;             // empty = registry defaults
  std::vector<std::string> overrides;  // "key=value", applied after the file
  std::string out_dir;                 // overrides config + EVORL_OUT_DIR
  int workers = -1;                    // -1 = keep config value
  std::string resume_path;             // checkpoint to continue from
};

// Full experiment: config -> workflow -> learn() -> metrics + checkpoint.
// Exit status 0 = budget completed, 1 = config error, 2 = runtime fault.
int run_experiment(const RunOptions& opts);

}  // namespace evorl
