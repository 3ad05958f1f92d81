#pragma once

#include <cstdint>
#include <vector>

#include "evorl/env.hpp"
#include "evorl/net.hpp"
#include "evorl/obs_norm.hpp"
#include "evorl/rng.hpp"
#include "evorl/sample_batch.hpp"
#include "evorl/thread_pool.hpp"

namespace evorl {

enum class ActionMode {
  Deterministic,  // tanh -> output (+ optional exploration noise), categorical -> argmax,
                  // gaussian -> mean
  Stochastic,     // categorical/gaussian heads sample and record log-probs
  UniformRandom,  // action space uniform; ignores the network
};

struct PolicyRef {
  const MlpSpec* spec = nullptr;  // may be null for UniformRandom
  const ObsNormState* obs_norm = nullptr;
  ActionMode mode = ActionMode::Deterministic;
  double exploration_noise = 0.0;  // gaussian std on continuous deterministic actions
};

struct RolloutMode {
  enum class Kind { Steps, Episodes } kind = Kind::Episodes;
  int count = 1;  // transitions per lane (Steps) or completed episodes per agent (Episodes)

  static RolloutMode steps(int t) { return {Kind::Steps, t}; }
  static RolloutMode episodes(int k) { return {Kind::Episodes, k}; }
};

struct RolloutOptions {
  bool collect_transitions = false;
  bool track_obs_stats = false;  // raw (pre-normalization) observations
};

struct AgentRollout {
  SampleBatch batch;  // lane-major concatenation when collected
  std::vector<Eigen::Index> lane_bounds;  // batch row offset per lane (size e+1)
  std::vector<double> episode_returns;    // completed episodes, lane-major
  std::vector<int> episode_lengths;
  std::int64_t steps = 0;
  WelfordStats obs_stats;
};

// The m x e lane grid: lane (agent a, env j) uses key fold_in(fold_in(key, a), j)
// and is simulated sequentially, so any scheduling of lanes over workers gives
// bitwise-identical results. Episodes mode spreads the k episodes of an agent
// over its lanes (lane j runs k/e plus one of the first k%e shares).
std::vector<AgentRollout> batched_rollout(ThreadPool& pool, const EnvSpec& env,
                                          const PolicyRef& policy,
                                          const std::vector<const ParamVector*>& agents,
                                          int envs_per_agent, RolloutMode mode, RngKey key,
                                          const RolloutOptions& opts);

// Single-lane sequential rollout (the oracle the grid is tested against).
AgentRollout rollout_lane(const EnvSpec& env, const PolicyRef& policy,
                          const ParamVector* params, RolloutMode mode, int episodes_this_lane,
                          RngKey lane_key, const RolloutOptions& opts);

// Observation statistics from n uniform-random-action timesteps, frozen.
ObsNormState vbn_fit(const EnvSpec& env, RngKey key, int n);

// Stochastic-head sampling shared with on-policy collection. Both fill logp
// with the log-density of the returned sample.
int sample_categorical(const Eigen::Ref<const Vec>& logits, RandomStream& stream, double& logp);
Vec sample_gaussian(const Eigen::Ref<const Vec>& mean, const Vec& logstd, RandomStream& stream,
                    double& logp);

// parallel_map per the exec contract: f(item, fold_in(key, i)) in input order.
template <typename In, typename F>
auto parallel_map(ThreadPool& pool, const std::vector<In>& items, RngKey key, F&& f)
    -> std::vector<decltype(f(items[0], RngKey{}))> {
  using Out = decltype(f(items[0], RngKey{}));
  std::vector<Out> out(items.size());
  pool.for_each_index(items.size(),
                      [&](std::size_t i) { out[i] = f(items[i], fold_in(key, i)); });
  return out;
}

}  // namespace evorl
