#include "evorl/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace evorl {

int sample_categorical(const Eigen::Ref<const Vec>& logits, RandomStream& stream, double& logp) {
  const double mx = logits.maxCoeff();
  const Vec p = (logits.array() - mx).exp();
  const double z = p.sum();
  const double u = stream.uniform() * z;
  Eigen::Index pick = logits.size() - 1;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    cum += p[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  logp = logits[pick] - mx - std::log(z);
  return static_cast<int>(pick);
}

Vec sample_gaussian(const Eigen::Ref<const Vec>& mean, const Vec& logstd, RandomStream& stream,
                    double& logp) {
  constexpr double kHalfLog2Pi = 0.5 * 1.8378770664093453;  // 0.5 * ln(2*pi)
  Vec a(mean.size());
  logp = 0.0;
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const double z = stream.normal();
    a[d] = mean[d] + std::exp(logstd[d]) * z;
    logp += -0.5 * z * z - logstd[d] - kHalfLog2Pi;
  }
  return a;
}

namespace {

// One action for one lane. logp_out is filled only for stochastic sampling heads.
Vec draw_action(const EnvSpec& env, const PolicyRef& policy, const ParamVector* params,
                const Vec& net_in, RandomStream& stream, double* logp_out) {
  Vec a(env.act_dim);
  if (policy.mode == ActionMode::UniformRandom) {
    if (env.discrete) {
      a[0] = static_cast<double>(stream.randint(static_cast<std::uint64_t>(env.num_actions)));
    } else {
      for (int d = 0; d < env.act_dim; ++d) a[d] = stream.uniform(env.act_low, env.act_high);
    }
    return a;
  }

  const MlpSpec& spec = *policy.spec;
  const Mat out = forward(spec, *params, net_in.transpose());

  if (spec.head == Head::Categorical) {
    const Vec logits = out.row(0);
    if (policy.mode == ActionMode::Deterministic) {
      Eigen::Index arg = 0;
      logits.maxCoeff(&arg);
      a[0] = static_cast<double>(arg);
    } else {
      double lp = 0.0;
      a[0] = static_cast<double>(sample_categorical(logits, stream, lp));
      if (logp_out) *logp_out = lp;
    }
    return a;
  }

  if (spec.head == Head::Gaussian && policy.mode == ActionMode::Stochastic) {
    const Vec logstd = gaussian_logstd(spec, *params);
    double lp = 0.0;
    a = sample_gaussian(out.row(0), logstd, stream, lp);
    if (logp_out) *logp_out = lp;
    return a;
  }

  // DeterministicTanh / Linear output, or a Gaussian head's mean.
  a = out.row(0);
  if (!env.discrete && policy.exploration_noise > 0.0) {
    for (int d = 0; d < env.act_dim; ++d) {
      a[d] = std::clamp(a[d] + policy.exploration_noise * stream.normal(), env.act_low,
                        env.act_high);
    }
  }
  return a;
}

}  // namespace

AgentRollout rollout_lane(const EnvSpec& env, const PolicyRef& policy, const ParamVector* params,
                          RolloutMode mode, int episodes_this_lane, RngKey lane_key,
                          const RolloutOptions& opts) {
  AgentRollout out;
  const bool by_episodes = mode.kind == RolloutMode::Kind::Episodes;
  if (by_episodes && episodes_this_lane <= 0) return out;

  std::vector<EnvState> state(1);
  Obs obs;
  {
    auto [s, o] = env_reset(env, fold_in(lane_key, 0));
    state[0] = s;
    obs = std::move(o);
  }
  RandomStream stream(fold_in(lane_key, 1));

  std::vector<Obs> obs_rows, next_rows;
  std::vector<Vec> act_rows;
  std::vector<double> rewards, logps;
  std::vector<std::uint8_t> terms, truncs;
  const bool want_logp =
      policy.mode == ActionMode::Stochastic && policy.spec &&
      (policy.spec->head == Head::Categorical || policy.spec->head == Head::Gaussian);

  Eigen::MatrixXd act_mat(env.act_dim, 1);
  double ep_return = 0.0;
  int ep_len = 0;
  int eps_done = 0;

  while (by_episodes ? eps_done < episodes_this_lane : out.steps < mode.count) {
    const Obs raw = obs;
    if (opts.track_obs_stats) out.obs_stats.add(raw);
    const Vec net_in = policy.obs_norm ? normalize(*policy.obs_norm, raw) : Vec(raw);

    double logp = 0.0;
    const Vec a = draw_action(env, policy, params, net_in, stream, want_logp ? &logp : nullptr);
    act_mat.col(0) = a;
    const StepResult res = batched_step(env, state, act_mat)[0];

    if (opts.collect_transitions) {
      obs_rows.push_back(raw);
      act_rows.push_back(a);
      rewards.push_back(res.reward);
      terms.push_back(res.terminated ? 1 : 0);
      truncs.push_back(res.truncated ? 1 : 0);
      next_rows.push_back(res.final_obs);
      if (want_logp) logps.push_back(logp);
    }

    ep_return += res.reward;
    ep_len += 1;
    out.steps += 1;
    if (res.terminated || res.truncated) {
      out.episode_returns.push_back(ep_return);
      out.episode_lengths.push_back(ep_len);
      ep_return = 0.0;
      ep_len = 0;
      eps_done += 1;
    }
    obs = res.obs;
  }

  if (opts.collect_transitions) {
    const Eigen::Index n = static_cast<Eigen::Index>(obs_rows.size());
    SampleBatch& b = out.batch;
    b.obs.resize(n, env.obs_dim);
    b.next_obs.resize(n, env.obs_dim);
    b.actions.resize(n, env.act_dim);
    b.rewards.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.obs.row(i) = obs_rows[i].transpose();
      b.next_obs.row(i) = next_rows[i].transpose();
      b.actions.row(i) = act_rows[i].transpose();
      b.rewards[i] = rewards[i];
    }
    b.terminated = std::move(terms);
    b.truncated = std::move(truncs);
    if (want_logp) b.logp = Eigen::Map<const Vec>(logps.data(), n);
  }
  return out;
}

std::vector<AgentRollout> batched_rollout(ThreadPool& pool, const EnvSpec& env,
                                          const PolicyRef& policy,
                                          const std::vector<const ParamVector*>& agents,
                                          int envs_per_agent, RolloutMode mode, RngKey key,
                                          const RolloutOptions& opts) {
  const std::size_t m = agents.size();
  const std::size_t e = static_cast<std::size_t>(envs_per_agent);
  std::vector<AgentRollout> lanes(m * e);
  pool.for_each_index(m * e, [&](std::size_t li) {
    const std::size_t a = li / e, j = li % e;
    const RngKey lane_key = fold_in(fold_in(key, a), j);
    int eps_this = 0;
    if (mode.kind == RolloutMode::Kind::Episodes) {
      eps_this = mode.count / static_cast<int>(e) +
                 (j < static_cast<std::size_t>(mode.count) % e ? 1 : 0);
    }
    lanes[li] = rollout_lane(env, policy, agents[a], mode, eps_this, lane_key, opts);
  });

  std::vector<AgentRollout> merged(m);
  for (std::size_t a = 0; a < m; ++a) {
    AgentRollout& agg = merged[a];
    agg.lane_bounds.assign(1, 0);
    std::vector<SampleBatch> parts;
    for (std::size_t j = 0; j < e; ++j) {
      AgentRollout& lane = lanes[a * e + j];
      agg.lane_bounds.push_back(agg.lane_bounds.back() + lane.batch.size());
      agg.episode_returns.insert(agg.episode_returns.end(), lane.episode_returns.begin(),
                                 lane.episode_returns.end());
      agg.episode_lengths.insert(agg.episode_lengths.end(), lane.episode_lengths.begin(),
                                 lane.episode_lengths.end());
      agg.steps += lane.steps;
      agg.obs_stats.merge(lane.obs_stats);
      if (opts.collect_transitions) parts.push_back(std::move(lane.batch));
    }
    if (opts.collect_transitions) agg.batch = concat_batches(parts);
  }
  return merged;
}

ObsNormState vbn_fit(const EnvSpec& env, RngKey key, int n) {
  PolicyRef policy;
  policy.mode = ActionMode::UniformRandom;
  RolloutOptions opts;
  opts.track_obs_stats = true;
  const AgentRollout r =
      rollout_lane(env, policy, nullptr, RolloutMode::steps(n), 0, key, opts);
  return ObsNormState::from_stats(ObsNormMode::VBN, r.obs_stats);
}

}  // namespace evorl
