#pragma once

// Shared plumbing for the workflow implementations: factories, config
// resolution, evaluation, and checkpoint segment helpers.

#include <memory>
#include <string>
#include <vector>

#include "evorl/config.hpp"
#include "evorl/env.hpp"
#include "evorl/obs_norm.hpp"
#include "evorl/optim.hpp"
#include "evorl/replay_buffer.hpp"
#include "evorl/rollout.hpp"
#include "evorl/workflow.hpp"

namespace evorl {

std::unique_ptr<Workflow> make_es_workflow(const Config& cfg);
std::unique_ptr<Workflow> make_ppo_workflow(const Config& cfg);
std::unique_ptr<Workflow> make_td3_workflow(const Config& cfg);
std::unique_ptr<Workflow> make_erl_workflow(const Config& cfg);
std::unique_ptr<Workflow> make_cemrl_workflow(const Config& cfg);
std::unique_ptr<Workflow> make_pbt_workflow(const Config& cfg);

EnvSpec env_from_config(const Config& cfg);

// Policy net acting directly on the env: categorical logits for discrete
// actions, bound-scaled tanh for continuous ones.
MlpSpec policy_net_spec(const EnvSpec& env, const std::vector<int>& hidden, bool layer_norm);

// Key sub-domains hanging off a run/state key. 0 and 1 are claimed by
// WorkflowState::step_key/eval_key.
inline RngKey init_key(RngKey run_key, std::uint64_t index) {
  return fold_in(fold_in(run_key, 2), index);
}

// Deterministic-policy evaluation: one lane per episode per agent.
EvalReport eval_params(ThreadPool& pool, const EnvSpec& env, const MlpSpec& spec,
                       const std::vector<const ParamVector*>& agents, const ObsNormState* norm,
                       int episodes, RngKey key);

ObsNormMode resolve_obs_norm_mode(const Config& cfg, const std::string& workflow_id);

// Checkpoint segment helpers; `p` is the segment-name prefix.
void save_adam(SegmentWriter& w, const std::string& p, const AdamState& a);
AdamState load_adam(const SegmentReader& r, const std::string& p);
void save_obs_norm(SegmentWriter& w, const std::string& p, const ObsNormState& s);
ObsNormState load_obs_norm(const SegmentReader& r, const std::string& p);
void save_buffer(SegmentWriter& w, const std::string& p, const ReplayBuffer& b);
void load_buffer(const SegmentReader& r, const std::string& p, ReplayBuffer& b);
void save_env_state(SegmentWriter& w, const std::string& p, const EnvState& s);
EnvState load_env_state(const SegmentReader& r, const std::string& p);

}  // namespace evorl
