#pragma once

#include <memory>
#include <string>
#include <vector>

#include "evorl/workflow.hpp"

namespace evorl {

// One tunable hyperparameter of the inner workflow. Log-scale ranges must not
// straddle zero: arithmetic runs on sign(low) * ln|value|.
struct HyperSpec {
  std::string key;
  double low = 0.0;
  double high = 0.0;
  bool log_scale = false;
};

struct PbtConfig {
  int pop = 128;
  int steps_per_iter = 64;       // inner step() calls per member per meta-iteration
  double perturb = 0.2;          // explore multiplies by 1 +- perturb
  double selection_ratio = 0.2;  // exploit swaps the bottom/top ceil(ratio * pop)
  int meta_episodes = 16;
  std::int64_t warmup_steps = 256;  // inner steps before exploit/explore engages
  bool cso = false;                 // pairwise teacher/student updates instead of truncation
  bool cso_per_coordinate = true;   // r1, r2 drawn per hyperparameter (false: per pair)
  std::vector<HyperSpec> search;
};

// Population-based training over any inner workflow. Members advance and are
// meta-evaluated in parallel; selection then either truncates (PBT) or runs
// the pairwise velocity update (PBT-CSO) on the inner tunables.
class PbtWorkflow final : public Workflow {
 public:
  PbtWorkflow(std::unique_ptr<const Workflow> inner, PbtConfig cfg);

  std::string id() const override;
  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext& ctx) const override;
  StepMetrics step(WorkflowState& state, ExecContext& ctx) const override;
  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override;
  void save(const WorkflowState& state, SegmentWriter& w, const std::string& prefix) const override;
  std::unique_ptr<WorkflowState> load(const SegmentReader& r,
                                      const std::string& prefix) const override;

 private:
  std::unique_ptr<const Workflow> inner_;
  PbtConfig cfg_;
};

}  // namespace evorl
