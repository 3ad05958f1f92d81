#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evorl/checkpoint.hpp"
#include "evorl/config.hpp"
#include "evorl/metrics.hpp"
#include "evorl/rng.hpp"
#include "evorl/thread_pool.hpp"

namespace evorl {

struct ExecContext {
  ThreadPool* pool = nullptr;
};

struct EvalReport {
  double mean_return = 0.0;
  double return_std = 0.0;  // over episodes, population variance
  int episodes = 0;
  std::vector<double> per_agent;  // per-agent means for population workflows
};

// Shared trainable-state base. `rng` is the immutable run key: step i derives
// everything from fold_in(fold_in(rng, 0), i) and evaluation at iteration i
// from fold_in(fold_in(rng, 1), i), which makes step() a pure function of
// (state, config) and resume from checkpoint exact.
struct WorkflowState {
  std::int64_t iteration = 0;
  RngKey rng;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t rl_updates = 0;

  virtual ~WorkflowState() = default;
  virtual std::unique_ptr<WorkflowState> clone() const = 0;

  RngKey step_key() const { return fold_in(fold_in(rng, 0), static_cast<std::uint64_t>(iteration)); }
  RngKey eval_key() const { return fold_in(fold_in(rng, 1), static_cast<std::uint64_t>(iteration)); }

  void save_base(SegmentWriter& w, const std::string& prefix) const;
  void load_base(const SegmentReader& r, const std::string& prefix);
};

class Workflow {
 public:
  virtual ~Workflow() = default;

  virtual std::string id() const = 0;
  virtual std::unique_ptr<WorkflowState> init(RngKey key, ExecContext& ctx) const = 0;
  // Advances state by one iteration (increments state.iteration) and reports metrics.
  virtual StepMetrics step(WorkflowState& state, ExecContext& ctx) const = 0;
  // Deterministic-policy evaluation of the state's representative agent(s).
  virtual EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                              ExecContext& ctx) const = 0;

  virtual void save(const WorkflowState& state, SegmentWriter& w,
                    const std::string& prefix) const = 0;
  virtual std::unique_ptr<WorkflowState> load(const SegmentReader& r,
                                              const std::string& prefix) const = 0;

  // Hyperparameters the PBT meta-layer may tune. Values live in the state so
  // population members diverge and checkpoints capture them.
  virtual std::vector<std::string> tunable_keys() const { return {}; }
  virtual void set_hyper(WorkflowState&, const std::string& key, double) const;
  virtual double get_hyper(const WorkflowState&, const std::string& key) const;
};

std::unique_ptr<Workflow> build_workflow(const Config& cfg);

struct Budget {
  std::int64_t iterations = 0;  // 0 = unbounded
  std::int64_t episodes = 0;
  std::int64_t env_steps = 0;

  bool reached(const WorkflowState& s) const {
    return (iterations > 0 && s.iteration >= iterations) ||
           (episodes > 0 && s.episodes >= episodes) ||
           (env_steps > 0 && s.env_steps >= env_steps);
  }
};

struct LearnOptions {
  Budget budget;
  int eval_interval = 10;  // 0 = never
  int eval_episodes = 128;
  int checkpoint_interval = 0;  // 0 = final checkpoint only
  std::string checkpoint_path;  // empty = no checkpoints
};

// Drives step() until the budget is reached; evaluates every eval_interval
// iterations, emits metrics per step and per eval, and checkpoints
// periodically plus once at the end.
void learn(const Workflow& wf, WorkflowState& state, ExecContext& ctx, const LearnOptions& opt,
           MetricsWriter& metrics);

void save_checkpoint_state(const Workflow& wf, const WorkflowState& state,
                           const std::string& path);
std::unique_ptr<WorkflowState> load_checkpoint_state(const Workflow& wf, const std::string& path);

}  // namespace evorl
